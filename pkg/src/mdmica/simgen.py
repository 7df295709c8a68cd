"""Simulated ICA problems: standardized non-Gaussian sources, mixing
matrices with a bounded condition number, and a trial runner.

The source catalog is frozen: entry numbers and parameters do not change, so
trial results are reproducible across versions of this package.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math
import time

import numpy as np

from ._validation import as_seed_sequence, make_rng
from .exceptions import MDMICAError
from .measures import evaluate
from .metrics import md_index
from .optimizer import OptimizerConfig, estimate_ica
from .rotation import n_angles

MODELS = {
    1: "different-distributions",
    2: "different-dimensions",
    3: "different-inits",
    4: "misspecified",
}


def _mixture_moments(weights, means, sds):
    w, m, s = (np.asarray(a, dtype=float) for a in (weights, means, sds))
    mean = float(w @ m)
    return mean, float(w @ (s ** 2 + m ** 2) - mean ** 2)


@dataclass(frozen=True)
class SourceSpec:
    """One catalog distribution with its analytic mean and variance."""

    index: int
    name: str
    family: str
    params: tuple
    mean: float
    variance: float

    def draw(self, rng, n):
        """Raw (unstandardized) draws."""
        p = self.params
        if self.family == "t":
            return rng.standard_t(p[0], n)
        if self.family == "uniform":
            return rng.uniform(-1.0, 1.0, n)
        if self.family == "laplace":
            return rng.laplace(0.0, 1.0, n)
        if self.family == "exponential":
            return rng.exponential(1.0, n)
        weights, means, sds = p
        comp = rng.choice(len(weights), size=n, p=weights)
        return np.asarray(means)[comp] + np.asarray(sds)[comp] * rng.standard_normal(n)


def _mixture(index, name, weights, means, sds):
    params = (tuple(weights), tuple(means), tuple(sds))
    return SourceSpec(index, name, "mixture", params, *_mixture_moments(*params))


CATALOG = (
    SourceSpec(1, "t5", "t", (5,), 0.0, 5.0 / 3.0),
    SourceSpec(2, "t8", "t", (8,), 0.0, 8.0 / 6.0),
    SourceSpec(3, "uniform", "uniform", (), 0.0, 1.0 / 3.0),
    SourceSpec(4, "laplace", "laplace", (), 0.0, 2.0),
    SourceSpec(5, "exponential", "exponential", (), 1.0, 1.0),
    _mixture(6, "bimodal-separated", (0.5, 0.5), (-2.0, 2.0), (0.5, 0.5)),
    _mixture(7, "bimodal", (0.5, 0.5), (-1.0, 1.0), (0.5, 0.5)),
    _mixture(8, "bimodal-narrow", (0.5, 0.5), (-1.0, 1.0), (0.25, 0.25)),
    _mixture(9, "bimodal-asymmetric", (0.75, 0.25), (0.0, 3.0), (1.0, 1.0)),
    _mixture(10, "bimodal-unequal", (0.5, 0.5), (-1.0, 1.5), (0.5, 1.0)),
    _mixture(11, "trimodal", (1 / 3, 1 / 3, 1 / 3), (-2.0, 0.0, 2.0), (0.5, 0.5, 0.5)),
    _mixture(12, "trimodal-asymmetric", (0.5, 0.3, 0.2), (-1.5, 0.5, 3.0), (0.5, 0.5, 0.5)),
    _mixture(13, "skewed", (0.8, 0.2), (0.0, 2.0), (1.0, 0.5)),
    _mixture(14, "skewed-strong", (0.9, 0.1), (0.0, 4.0), (1.0, 1.0)),
    _mixture(15, "scale-mixture", (0.5, 0.5), (0.0, 0.0), (1.0, 0.1)),
    _mixture(16, "contaminated", (0.95, 0.05), (0.0, 0.0), (1.0, 5.0)),
    _mixture(17, "scale-skewed", (0.5, 0.5), (0.0, 1.5), (1.0, 1.0 / 3.0)),
    _mixture(18, "four-modes", (0.25, 0.25, 0.25, 0.25), (-3.0, -1.0, 1.0, 3.0),
             (0.4, 0.4, 0.4, 0.4)),
)

BIMODAL = ("bimodal-separated", "bimodal", "bimodal-narrow", "bimodal-asymmetric",
           "bimodal-unequal")

_BY_NAME = {s.name: s for s in CATALOG}


def source_spec(spec):
    """Look up a catalog entry by name, 1-based index, or pass one through."""
    if isinstance(spec, SourceSpec):
        return spec
    if isinstance(spec, (int, np.integer)) and not isinstance(spec, bool):
        if not 1 <= spec <= len(CATALOG):
            raise MDMICAError(f"catalog index must be in 1..{len(CATALOG)}, got {spec}")
        return CATALOG[spec - 1]
    try:
        return _BY_NAME[spec]
    except (KeyError, TypeError):
        raise MDMICAError(f"unknown source {spec!r}; choose from {sorted(_BY_NAME)}") from None


def sample_source(spec, n, seed=None):
    """``n`` standardized i.i.d. draws (1-d array) from a catalog entry."""
    spec = source_spec(spec)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return (spec.draw(rng, n) - spec.mean) / math.sqrt(spec.variance)


def sample_sources(specs, n, seed=None):
    """Independent columns, one per spec, each from its own spawned stream."""
    children = as_seed_sequence(seed).spawn(len(specs))
    return np.column_stack([sample_source(s, n, c) for s, c in zip(specs, children)])


def random_mixing(d, cond_lo=1.0, cond_hi=2.0, seed=None):
    """Random ``d x d`` matrix with condition number in ``[cond_lo, cond_hi]``.

    The singular vectors come from the SVD of a Gaussian matrix; the
    singular values are spaced evenly from ``c`` to 1 with ``c`` uniform on
    ``[1 / cond_hi, 1 / cond_lo]``.
    """
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    if not 1.0 <= cond_lo <= cond_hi:
        raise ValueError(f"need 1 <= cond_lo <= cond_hi, got {cond_lo}, {cond_hi}")
    rng = make_rng(seed)
    U, _, Vt = np.linalg.svd(rng.standard_normal((d, d)))
    c = rng.uniform(1.0 / cond_hi, 1.0 / cond_lo)
    return (U * np.linspace(c, 1.0, d)) @ Vt


# -- estimators ---------------------------------------------------------------

_BASE_LABELS = {
    "asym-def": ("deflation", "asym"),
    "asym-par": ("parallel", "asym"),
    "sym": ("parallel", "sym"),
    "comp": ("parallel", "comp"),
    "hsic": ("parallel", "hsic"),
}
_INIT_SUFFIXES = {
    "single": ("single", None),
    "lhs": ("lhs", None),
    "lhs+bo-exp": ("lhs_bo", "exp"),
    "lhs+bo-matern52": ("lhs_bo", "matern52"),
    "identity": ("single", None),
}
ESTIMATOR_LABELS = tuple(_BASE_LABELS) + tuple(
    f"{b}:{s}" for b in _BASE_LABELS for s in _INIT_SUFFIXES)


def parse_estimator(label, **overrides):
    """Map a label such as ``"sym"`` or ``"comp:lhs+bo-exp"`` to a config.

    Returns ``(config, identity_start)``; the ``identity`` suffix starts the
    local search at zero angles instead of a sampled point.
    """
    base, _, suffix = label.partition(":")
    suffix = suffix or "lhs"
    if base not in _BASE_LABELS or suffix not in _INIT_SUFFIXES:
        raise ValueError(f"unknown estimator {label!r}; valid labels: "
                         + ", ".join(ESTIMATOR_LABELS))
    scheme, measure = _BASE_LABELS[base]
    init, kernel = _INIT_SUFFIXES[suffix]
    kw = dict(scheme=scheme, measure=measure, init=init)
    if kernel:
        kw["bo_kernel"] = kernel
    kw.update(overrides)
    return OptimizerConfig(**kw), suffix == "identity"


# -- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A simulation model.

    ``sources`` fixes the catalog entries per column; when None each trial
    draws ``d`` entries without replacement from ``pool``. The misspecified
    model (4) always has ``d = 2``.
    """

    model: int = 1
    d: int = 3
    n: int = 1000
    sources: tuple = None
    pool: tuple = tuple(s.name for s in CATALOG)
    cond_lo: float = 1.0
    cond_hi: float = 2.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {sorted(MODELS)}, got {self.model}")
        if self.model == 4 and self.d != 2:
            object.__setattr__(self, "d", 2)
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.sources is not None:
            if len(self.sources) != self.d:
                raise ValueError(f"need {self.d} sources, got {len(self.sources)}")
            object.__setattr__(self, "sources",
                               tuple(source_spec(s).name for s in self.sources))
        pool = tuple(source_spec(s).name for s in self.pool)
        if self.sources is None and len(pool) < self.d:
            raise ValueError(f"pool of {len(pool)} entries cannot fill d={self.d}")
        object.__setattr__(self, "pool", pool)

    @property
    def name(self):
        return MODELS[self.model]


MEASURE_TRIPLE = ("asym", "sym", "comp")


@dataclass
class TrialRecord:
    """One (trial, estimator) outcome; ``error`` is set when the fit failed."""

    model: str
    estimator: str
    trial: int
    seed: int
    d: int
    n: int
    sources: tuple
    md: float = math.nan
    objective: float = math.nan
    init_objective: float = math.nan
    evaluations: int = 0
    wall_time: float = 0.0
    measures_before: dict = None
    measures_after: dict = None
    error: str = None

    @property
    def ok(self):
        return self.error is None

    def as_dict(self):
        out = asdict(self)
        out["sources"] = list(self.sources)
        return out


def _trial_data(spec, trial_seed):
    data_seed, mix_seed, pick_seed = trial_seed.spawn(3)
    if spec.sources is not None:
        names = spec.sources
    else:
        picks = make_rng(pick_seed).choice(len(spec.pool), size=spec.d, replace=False)
        names = tuple(spec.pool[i] for i in picks)
    X = sample_sources(names, spec.n, data_seed)
    if spec.model == 4:
        return names, None, np.column_stack([X[:, 0], X[:, 1] ** 2])
    M = random_mixing(spec.d, spec.cond_lo, spec.cond_hi, mix_seed)
    return names, M, X @ M.T


def _measure_triple(X):
    return {m: evaluate(X, m) for m in MEASURE_TRIPLE}


def _run_one(spec, estimators, trial, trial_seed, overrides):
    names, M, Y = _trial_data(spec, trial_seed)
    seed = int(trial_seed.generate_state(1)[0])
    records = []
    for label in estimators:
        rec = TrialRecord(spec.name, label, trial, seed, spec.d, spec.n, names)
        start = time.perf_counter()
        try:
            cfg, identity = parse_estimator(label, seed=seed, **overrides)
            theta0 = np.zeros(n_angles(spec.d)) if identity else None
            res = estimate_ica(Y, cfg, theta0)
            rec.objective = res.objective
            rec.init_objective = res.init_objective
            rec.evaluations = res.evaluations
            if M is not None:
                rec.md = md_index(res.W_hat, np.linalg.inv(res.H @ M)).md
            else:
                Z = (Y - res.mean) @ res.H.T
                rec.measures_before = _measure_triple(Z)
                rec.measures_after = _measure_triple(res.X_hat)
        except (MDMICAError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        rec.wall_time = time.perf_counter() - start
        records.append(rec)
    return records


def run_trials(spec, estimators, trials, seed=None, jobs=1, **overrides):
    """Run every estimator on ``trials`` independently seeded problems.

    All estimators see the same data and optimizer seed within a trial, so
    comparisons are paired. Failed fits are recorded with ``error`` set and
    do not stop the batch. Records are ordered by trial, then estimator,
    whatever ``jobs`` is.

    Parameters
    ----------
    spec : ModelSpec
    estimators : sequence of str
        Labels accepted by :func:`parse_estimator`.
    trials : int
    seed : int, optional
        Master seed; trial ``t`` uses the ``t``-th spawned child.
    jobs : int
        Worker processes. Results do not depend on it.
    **overrides
        Extra :class:`OptimizerConfig` fields applied to every estimator.
    """
    estimators = list(estimators)
    for label in estimators:
        parse_estimator(label)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    children = as_seed_sequence(seed).spawn(trials)
    args = [(spec, estimators, t, children[t], overrides) for t in range(trials)]
    if jobs <= 1:
        batches = [_run_one(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_one, *zip(*args)))
    return [r for batch in batches for r in batch]


def _mean_stderr(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return mean, se


@dataclass
class Aggregate:
    model: str
    estimator: str
    trials: int
    failures: int
    md_mean: float
    md_stderr: float
    objective_mean: float
    objective_stderr: float
    wall_time_mean: float
    before: dict = field(default_factory=dict)
    after: dict = field(default_factory=dict)


def aggregate(records):
    """Mean and standard error per (model, estimator), over successful trials.

    Groups appear in first-seen order.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.model, r.estimator), []).append(r)
    out = []
    for (model, label), recs in groups.items():
        good = [r for r in recs if r.ok]
        md = _mean_stderr([r.md for r in good])
        obj = _mean_stderr([r.objective for r in good])
        wall = _mean_stderr([r.wall_time for r in recs])[0]
        agg = Aggregate(model, label, len(recs), len(recs) - len(good), *md, *obj, wall)
        if good and good[0].measures_before is not None:
            for m in MEASURE_TRIPLE:
                agg.before[m] = _mean_stderr([r.measures_before[m] for r in good])
                agg.after[m] = _mean_stderr([r.measures_after[m] for r in good])
        out.append(agg)
    return out
