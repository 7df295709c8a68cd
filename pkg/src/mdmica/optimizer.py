"""Estimate the rotation minimizing a dependence measure of ``Z @ W(theta).T``.

The local method is BFGS on finite-difference gradients. Angles move freely
on the real line during the search; since ``W`` is ``2*pi``-periodic in each
angle they are reduced modulo ``2*pi`` after every accepted step, and the
final estimate is mapped to the support angles of the same rotation.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .exceptions import MDMICAError, NonFiniteObjectiveError
from .init import KERNELS, CandidateSet, initial_candidates
from .measures import MeasureKind, as_measure, dcov_sq_terms, evaluate
from .rotation import (
    block_slices,
    canonical_angles,
    check_angles,
    dim_from_n_angles,
    in_support,
    rotation_from_angles,
    wrap_angles,
)
from .whitening import whiten

SCHEMES = ("deflation", "parallel")
INITS = ("single", "lhs", "lhs_bo")
DEFLATION_OBJECTIVES = ("full", "single")

_SCHEME_ALIASES = {"def": "deflation", "par": "parallel"}
_INIT_ALIASES = {"lhs+bo": "lhs_bo"}

_ARMIJO = 1e-4
_FIRST_STEP = 0.1
_MAX_STEP = 1.0
_STALL_WINDOW = 10


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one estimation run.

    ``lhs_points`` and ``bo_iters`` default to ``10 * d`` once the dimension
    is known; see :meth:`resolved`.
    """

    scheme: str = "parallel"
    measure: MeasureKind = field(default_factory=MeasureKind)
    init: str = "lhs"
    lhs_points: int = None
    bo_iters: int = None
    bo_kernel: str = "matern52"
    grad_step: float = 1e-6
    tol_grad: float = 1e-8
    tol_obj: float = 1e-6
    max_iters: int = 200
    line_search_max: int = 30
    seed: int = 0
    deflation_objective: str = "full"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "scheme", _SCHEME_ALIASES.get(self.scheme, self.scheme))
        set_(self, "init", _INIT_ALIASES.get(self.init, self.init))
        set_(self, "measure", as_measure(self.measure))
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}; choose from {INITS}")
        if self.bo_kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.bo_kernel!r}; choose from {KERNELS}")
        if self.deflation_objective not in DEFLATION_OBJECTIVES:
            raise ValueError(f"deflation_objective must be one of {DEFLATION_OBJECTIVES}")
        if self.scheme == "deflation" and self.measure.tag != "asym":
            raise ValueError("the deflation scheme requires the asym measure")
        for name in ("lhs_points", "bo_iters"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 1):
                raise ValueError(f"{name} must be a positive integer, got {v}")
        for name in ("grad_step", "tol_grad"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.tol_obj >= 0:
            raise ValueError("tol_obj must be nonnegative")
        for name in ("max_iters", "line_search_max"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.seed is not None and int(self.seed) < 0:
            raise ValueError("seed must be a nonnegative integer")

    def resolved(self, d):
        """Copy with dimension-dependent defaults filled in."""
        return replace(self,
                       lhs_points=10 * d if self.lhs_points is None else self.lhs_points,
                       bo_iters=10 * d if self.bo_iters is None else self.bo_iters)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["measure"] = {"tag": self.measure.tag, "bandwidth": self.measure.bandwidth}
        return out


@dataclass
class ICAResult:
    """Output of an estimation run. ``X_hat == Z @ W_hat.T``."""

    theta_hat: np.ndarray
    W_hat: np.ndarray
    X_hat: np.ndarray
    objective: float
    init_objective: float
    theta_init: np.ndarray
    evaluations: int
    H: np.ndarray = None
    mean: np.ndarray = None
    n_iter: int = 0
    trace: list = field(default_factory=list)
    candidates: CandidateSet = None
    config: OptimizerConfig = None

    @property
    def unmixing(self):
        """Unmixing matrix for centered observations, ``W_hat @ H``."""
        H = np.eye(len(self.W_hat)) if self.H is None else self.H
        return self.W_hat @ H


class _Counter:
    """Wrap an objective, counting calls and rejecting non-finite values."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, theta):
        self.calls += 1
        v = float(self.fn(theta))
        if not math.isfinite(v):
            raise NonFiniteObjectiveError(f"objective returned {v}",
                                          theta=np.array(theta, dtype=float))
        return v


def _fd_gradient(f, x, h):
    g = np.empty_like(x)
    for k in range(x.size):
        step = h * (1.0 + abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        g[k] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def local_minimize(objective, theta0, config=None, free_block=None, *, to_support=True,
                   trace=None):
    """Quasi-Newton descent from ``theta0`` with central-difference gradients.

    Parameters
    ----------
    objective : callable
        Maps a full angle vector to a real. Must be ``2*pi``-periodic in
        every free angle.
    theta0 : array
    config : OptimizerConfig, optional
        Supplies ``grad_step``, ``tol_grad``, ``max_iters`` and
        ``line_search_max``.
    free_block : int, optional
        Vary only the angles of this block; the rest stay at ``theta0``.
    to_support : bool
        Map the result to the support angles of the same rotation. Requires
        ``len(theta0)`` to be ``d * (d - 1) / 2``.
    trace : list, optional
        Receives the objective value after every iteration.

    Returns
    -------
    theta, value
        ``value <= objective(theta0)``.

    Stops when the largest gradient entry is below ``tol_grad``, after
    ``max_iters`` iterations, when the objective fell by less than
    ``tol_obj`` (relative) over the last ten iterations, or when neither
    the quasi-Newton direction nor steepest descent gives an Armijo
    decrease within ``line_search_max`` halvings.
    """
    theta, value, _ = _bfgs(objective, theta0, config, free_block, to_support, trace)
    return theta, value


def _bfgs(objective, theta0, config, free_block, to_support, trace):
    cfg = config if config is not None else OptimizerConfig()
    f_full = objective if isinstance(objective, _Counter) else _Counter(objective)
    base = np.array(theta0, dtype=float)
    if free_block is None:
        idx = np.arange(base.size)
    else:
        idx = np.arange(base.size)[block_slices(dim_from_n_angles(base.size))[free_block]]

    def f(x):
        t = base.copy()
        t[idx] = x
        return f_full(t)

    x = base[idx].copy()
    fx = f(x)
    f0, x0 = fx, x.copy()
    g = _fd_gradient(f, x, cfg.grad_step)
    q = x.size
    Hinv = None
    n_iter = 0
    history = [fx]
    for n_iter in range(1, cfg.max_iters + 1):
        if np.max(np.abs(g)) < cfg.tol_grad:
            n_iter -= 1
            break
        step = None
        for attempt in ("quasi-newton", "steepest"):
            if attempt == "quasi-newton" and Hinv is not None:
                direction = -Hinv @ g
                if direction @ g >= 0:
                    continue
            else:
                direction = -g * (_FIRST_STEP / np.max(np.abs(g)))
            big = np.max(np.abs(direction))
            if big > _MAX_STEP:
                direction *= _MAX_STEP / big
            slope = g @ direction
            alpha = 1.0
            for _ in range(cfg.line_search_max):
                x_new = x + alpha * direction
                f_new = f(x_new)
                if f_new <= fx + _ARMIJO * alpha * slope:
                    step = alpha * direction
                    break
                alpha *= 0.5
            if step is not None:
                break
            if attempt == "quasi-newton":
                Hinv = None
        if step is None:
            n_iter -= 1
            break
        g_new = _fd_gradient(f, x_new, cfg.grad_step)
        y = g_new - g
        sy = step @ y
        if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
            if Hinv is None:
                Hinv = (sy / (y @ y)) * np.eye(q)
            rho = 1.0 / sy
            V = np.eye(q) - rho * np.outer(step, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(step, step)
        x = wrap_angles(x_new)
        fx, g = f_new, g_new
        if trace is not None:
            trace.append(fx)
        history.append(fx)
        if (len(history) > _STALL_WINDOW
                and history[-1 - _STALL_WINDOW] - fx <= cfg.tol_obj * abs(fx)):
            break

    theta = base.copy()
    theta[idx] = x
    if fx > f0:
        theta[idx], fx = x0, f0
    if to_support:
        theta = _to_support(theta)
    return theta, fx, n_iter


def _to_support(theta):
    # in-support angles are returned as they are, so no round-off is added
    if in_support(theta):
        return theta
    return canonical_angles(theta)


def rotation_objective(Z, measure):
    """``theta -> measure(Z @ W(theta).T)``."""
    kind = as_measure(measure)
    d = Z.shape[1]

    def objective(theta):
        W = rotation_from_angles(theta, d, check=False)
        return evaluate(Z @ W.T, kind)

    return objective


def _single_term_objective(Z, stage):
    d = Z.shape[1]

    def objective(theta):
        X = Z @ rotation_from_angles(theta, d, check=False).T
        return max(0.0, float(dcov_sq_terms(X, False)[stage]))

    return objective


def _initialize(objective, d, cfg, theta0):
    if theta0 is not None:
        theta0 = check_angles(theta0, d)
        v = objective(theta0)
        return theta0, v, CandidateSet(theta0[None, :], [v], ("given",))
    cs = initial_candidates(objective, d, cfg.init, cfg.lhs_points, cfg.bo_iters,
                            cfg.bo_kernel, cfg.seed)
    theta, v = cs.best()
    return theta, v, cs


def _finish(Z, counter, cfg, theta_init, init_value, theta, cs, trace, n_iter):
    d = Z.shape[1]
    theta = _to_support(theta)
    W = rotation_from_angles(theta, d)
    value = counter(theta)
    if value > init_value:
        # canonicalization can move the value by round-off only
        theta = np.array(theta_init, dtype=float)
        W = rotation_from_angles(theta, d, check=False)
        value = init_value
    return ICAResult(theta_hat=theta, W_hat=W, X_hat=Z @ W.T, objective=value,
                     init_objective=init_value, theta_init=np.array(theta_init),
                     evaluations=counter.calls, n_iter=n_iter, trace=trace,
                     candidates=cs, config=cfg)


def _check_whitened(Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] < 2:
        raise MDMICAError(f"need an n x d sample with d >= 2, got shape {Z.shape}")
    return Z


def ica_parallel(Z, config=None, theta0=None):
    """Jointly minimize the measure over all angles.

    ``Z`` must already be whitened. ``theta0`` overrides the configured
    initialization.
    """
    Z = _check_whitened(Z)
    d = Z.shape[1]
    cfg = (config or OptimizerConfig()).resolved(d)
    counter = _Counter(rotation_objective(Z, cfg.measure))
    theta_init, init_value, cs = _initialize(counter, d, cfg, theta0)
    trace = [init_value]
    theta, _, n_iter = _bfgs(counter, theta_init, cfg, None, False, trace)
    return _finish(Z, counter, cfg, theta_init, init_value, theta, cs, trace, n_iter)


def ica_deflation(Z, config=None, theta0=None):
    """Minimize block by block, ``i = 0 .. d-2``, committing each block.

    Stage ``i`` varies only the angles of block ``i``. By default it
    minimizes the full asymmetric measure; with
    ``deflation_objective="single"`` it minimizes only the summand
    ``V_n^2(X_i, (X_i+1, ..., X_d))``.
    """
    Z = _check_whitened(Z)
    d = Z.shape[1]
    cfg = (config or OptimizerConfig(scheme="deflation", measure="asym")).resolved(d)
    if cfg.measure.tag != "asym":
        raise ValueError("the deflation scheme requires the asym measure")
    counter = _Counter(rotation_objective(Z, cfg.measure))
    theta_init, init_value, cs = _initialize(counter, d, cfg, theta0)
    trace = [init_value]
    theta = theta_init.copy()
    n_iter = 0
    for stage in range(d - 1):
        if cfg.deflation_objective == "full":
            stage_obj = counter
        else:
            stage_obj = _Counter(_single_term_objective(Z, stage))
        theta, _, k = _bfgs(stage_obj, theta, cfg, stage, False, trace)
        n_iter += k
        if stage_obj is not counter:
            counter.calls += stage_obj.calls
    return _finish(Z, counter, cfg, theta_init, init_value, theta, cs, trace, n_iter)


def estimate_ica(Y, config=None, theta0=None):
    """Whiten ``Y``, initialize, and run the configured scheme.

    The recovered sources satisfy ``X_hat = (Y - mean) @ H.T @ W_hat.T``.
    """
    cfg = config or OptimizerConfig()
    white = whiten(Y)
    run = ica_deflation if cfg.scheme == "deflation" else ica_parallel
    res = run(white.Z, cfg, theta0)
    res.H = white.H
    res.mean = white.mean
    return res
