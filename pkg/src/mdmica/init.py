"""Initial points for the local optimizer: Latin hypercube sampling and
Gaussian-process Bayesian optimization with expected improvement."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm

from ._validation import as_seed_sequence, make_rng
from .exceptions import IllConditionedGPError, MDMICAError, NonFiniteObjectiveError
from .rotation import dim_from_n_angles, n_angles, support_upper

KERNELS = ("exp", "matern52")

_LENGTH_GRID = np.geomspace(0.1, 10.0, 9)
_SIGNAL_GRID = np.geomspace(0.1, 10.0, 5)
_NOISE_FLOOR = 1e-8


def lhs_sample(m, d, seed=None):
    """``m`` Latin hypercube points over the angle support for dimension ``d``.

    Each coordinate's range is cut into ``m`` equal strata holding exactly
    one point, placed uniformly within its stratum. Strata are matched
    across coordinates by independent random permutations.

    Returns
    -------
    ndarray of shape (m, d * (d - 1) / 2)
    """
    if m < 1:
        raise ValueError(f"need at least one sample, got m={m}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    p = n_angles(d)
    upper = support_upper(d)
    strata = np.column_stack([rng.permutation(m) for _ in range(p)]) if p else np.empty((m, 0))
    u = (strata + rng.random((m, p))) / m
    pts = u * upper
    # keep the open upper end open after rounding
    return np.minimum(pts, np.nextafter(upper, 0.0))


@dataclass
class CandidateSet:
    """Evaluated candidate angle vectors."""

    points: np.ndarray
    values: np.ndarray
    provenance: tuple = ()
    skipped: tuple = field(default=())

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")
        if not self.provenance:
            self.provenance = ("lhs",) * len(self.values)
        self.provenance = tuple(self.provenance)
        if len(self.provenance) != len(self.values):
            raise ValueError("provenance and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("candidate values must be finite")

    def __len__(self):
        return len(self.values)

    def best_index(self):
        # np.argmin keeps the lowest index among ties
        return int(np.argmin(self.values))

    def best(self):
        i = self.best_index()
        return self.points[i].copy(), float(self.values[i])

    def append(self, point, value, tag):
        return CandidateSet(np.vstack([self.points, point]), np.append(self.values, value),
                            self.provenance + (tag,), self.skipped)


def best_candidate(objective, candidates, tag="lhs"):
    """Evaluate ``objective`` at every candidate and keep the minimizer.

    Candidates with a non-finite value are dropped and their indices kept in
    ``CandidateSet.skipped``.

    Returns
    -------
    theta, value, CandidateSet
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if len(candidates) == 0:
        raise ValueError("no candidates to evaluate")
    pts, vals, skipped = [], [], []
    for i, theta in enumerate(candidates):
        v = float(objective(theta))
        if math.isfinite(v):
            pts.append(theta)
            vals.append(v)
        else:
            skipped.append(i)
    if not vals:
        raise NonFiniteObjectiveError("objective is non-finite at every candidate",
                                      theta=candidates[0])
    cs = CandidateSet(np.array(pts), np.array(vals), (tag,) * len(vals), tuple(skipped))
    theta, value = cs.best()
    return theta, value, cs


def kernel_matrix(A, B, kernel, length_scale, signal_variance):
    """Stationary kernel matrix between rows of ``A`` and ``B``."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    if kernel == "exp":
        return signal_variance * np.exp(-sq / (2.0 * length_scale ** 2))
    if kernel == "matern52":
        t = math.sqrt(5.0) * np.sqrt(sq) / length_scale
        return signal_variance * (1.0 + t + t * t / 3.0) * np.exp(-t)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


class GPModel:
    """Gaussian-process regression surrogate with a constant prior mean.

    The Cholesky factor of ``K + noise * I`` is computed on construction.
    """

    def __init__(self, observations, kernel="matern52", length_scale=1.0,
                 signal_variance=1.0, noise_variance=1e-8, mean=0.0):
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
        if not (length_scale > 0 and signal_variance > 0):
            raise ValueError("length_scale and signal_variance must be positive")
        if not noise_variance >= 1e-10:
            raise ValueError("noise_variance must be at least 1e-10")
        self.observations = observations
        self.kernel = kernel
        self.length_scale = float(length_scale)
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)
        self.mean = float(mean)
        X = observations.points
        K = kernel_matrix(X, X, kernel, self.length_scale, self.signal_variance)
        K[np.diag_indices_from(K)] += self.noise_variance
        try:
            self._chol = cho_factor(K, lower=True)
        except LinAlgError as exc:
            raise IllConditionedGPError(f"GP Gram matrix is not positive definite: {exc}")
        self._alpha = cho_solve(self._chol, observations.values - self.mean)

    def log_marginal_likelihood(self):
        resid = self.observations.values - self.mean
        L = self._chol[0]
        return float(-0.5 * resid @ self._alpha - np.sum(np.log(np.diag(L)))
                     - 0.5 * len(resid) * math.log(2 * math.pi))

    def predict(self, X):
        """Posterior mean and variance at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Ks = kernel_matrix(X, self.observations.points, self.kernel,
                           self.length_scale, self.signal_variance)
        mu = self.mean + Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = self.signal_variance - np.sum(Ks * v.T, axis=1)
        return mu, np.maximum(var, 0.0)


def gp_posterior(model, x):
    """Posterior ``(mean, variance)`` of ``model`` at a single point."""
    mu, var = model.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mu[0]), float(var[0])


def fit_gp(observations, kernel="matern52"):
    """Pick hyperparameters by maximum marginal likelihood over a log grid.

    The prior mean is the sample mean of the observed values, the signal
    variance is searched on a grid around their sample variance and the
    noise is fixed at ``1e-8`` times the signal variance.
    """
    y = observations.values
    mean = float(np.mean(y))
    scale = float(np.var(y))
    if not scale > 0:
        scale = 1.0
    best, best_ll = None, -np.inf
    for ell in _LENGTH_GRID:
        for s in _SIGNAL_GRID:
            sig = s * scale
            try:
                model = GPModel(observations, kernel, ell, sig, _NOISE_FLOOR * sig, mean)
            except IllConditionedGPError:
                continue
            ll = model.log_marginal_likelihood()
            if ll > best_ll:
                best, best_ll = model, ll
    if best is None:
        raise IllConditionedGPError("no grid hyperparameters gave a valid GP fit")
    return best


def expected_improvement(mu, var, best):
    """Expected improvement below ``best`` for a minimization problem."""
    mu = np.asarray(mu, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    gain = best - mu
    out = np.maximum(gain, 0.0)
    ok = sd > 0
    z = gain[ok] / sd[ok]
    out[ok] = gain[ok] * norm.cdf(z) + sd[ok] * norm.pdf(z)
    return out


def bayes_opt(objective, init_candidates, iters, kernel="matern52", seed=None, d=None):
    """Extend an evaluated candidate set by ``iters`` expected-improvement steps.

    Each step standardizes the observed values, refits the GP, scores EI on
    a fresh LHS batch of ``100 * p`` points plus the incumbent, evaluates
    the objective at the best-scoring point and appends it with provenance
    ``"bo"``.
    """
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    cs = init_candidates
    if len(cs) == 0:
        raise ValueError("bayes_opt needs at least one evaluated candidate")
    if d is None:
        d = dim_from_n_angles(cs.points.shape[1])
    rng = make_rng(seed)
    p = cs.points.shape[1]
    for _ in range(iters):
        # EI's argmax is invariant to a positive affine rescaling of the
        # values; standardizing keeps the relative noise above the absolute
        # 1e-10 floor when measure values are tiny
        center = float(np.mean(cs.values))
        spread = float(np.std(cs.values)) or 1.0
        scaled = CandidateSet(cs.points, (cs.values - center) / spread, cs.provenance)
        model = fit_gp(scaled, kernel)
        incumbent, best = scaled.best()
        batch = np.vstack([incumbent, lhs_sample(100 * p, d, rng)])
        mu, var = model.predict(batch)
        ei = expected_improvement(mu, var, best)
        x = batch[int(np.argmax(ei))]
        v = float(objective(x))
        if not math.isfinite(v):
            raise NonFiniteObjectiveError(f"objective returned {v} at a BO point", theta=x)
        cs = cs.append(x, v, "bo")
    return cs


def initial_candidates(objective, d, init="lhs", lhs_points=None, bo_iters=None,
                       bo_kernel="matern52", seed=None):
    """Run one of the initialization strategies and return the candidate set.

    ``init`` is ``"single"`` (one LHS point), ``"lhs"`` (best of
    ``lhs_points``) or ``"lhs_bo"`` (the LHS points extended by ``bo_iters``
    BO steps). Defaults are ``10 * d`` for both counts. The LHS stream is the
    same for ``"lhs"`` and ``"lhs_bo"`` under one seed.
    """
    lhs_seed, bo_seed = as_seed_sequence(seed).spawn(2)
    lhs_points = 10 * d if lhs_points is None else lhs_points
    bo_iters = 10 * d if bo_iters is None else bo_iters
    if init == "single":
        pts = lhs_sample(1, d, lhs_seed)
    elif init in ("lhs", "lhs_bo"):
        pts = lhs_sample(lhs_points, d, lhs_seed)
    else:
        raise MDMICAError(f"unknown init {init!r}")
    _, _, cs = best_candidate(objective, pts)
    if init == "lhs_bo":
        cs = bayes_opt(objective, cs, bo_iters, bo_kernel, bo_seed, d=d)
    return cs
