"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 usage or input error, 3 estimation
failure. Every run writes a JSON-lines manifest holding the fully resolved
argument list, so ``mdmica replay`` can reproduce it.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import MDMICAError, ShapeError
from .measures import MEASURES, MeasureKind, evaluate
from .metrics import md_index
from .optimizer import OptimizerConfig, estimate_ica
from .simgen import BIMODAL, ESTIMATOR_LABELS, MODELS, ModelSpec, aggregate, run_trials

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_ESTIMATION = 0, 1, 2, 3

SEED_ENV = "MDMICA_SEED"


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 2."""


class EstimationError(Exception):
    """The fit itself failed; maps to exit code 3."""


# -- csv ----------------------------------------------------------------------

def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix(path):
    """Parse a numeric CSV. A non-numeric first row is taken as a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    start = 0
    if rows and not all(_is_number(c.strip()) for c in rows[0]):
        start = 1
    data, width = [], None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise UsageError(f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: non-numeric field") from None
        if not all(math.isfinite(v) for v in values):
            raise UsageError(f"{path}: line {lineno}: non-finite value")
        data.append(values)
    if not data:
        raise UsageError(f"{path}: no data rows")
    return np.array(data, dtype=float)


def write_matrix(path, A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in A:
            writer.writerow([repr(float(v)) for v in row])


def _jsonable(obj):
    # NaN is not valid JSON; write it as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _append_jsonl(path, obj):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(_jsonable(obj), allow_nan=False) + "\n")


def _manifest(command, argv, seed, inputs, outputs, start, **extra):
    return dict(kind="manifest", command=command, argv=argv, seed=seed, inputs=inputs,
                outputs=outputs, version=__version__,
                wall_time=time.perf_counter() - start, **extra)


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        value = int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be a nonnegative integer, got {env!r}") from None
    if value < 0:
        raise UsageError(f"{SEED_ENV} must be a nonnegative integer, got {env!r}")
    return value


def _bandwidth(text):
    if text is None or text == "median":
        return "median"
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError("--bandwidth must be 'median' or comma-separated numbers") from None
    return values[0] if len(values) == 1 else tuple(values)


def _measure_kind(args):
    try:
        return MeasureKind(args.measure, _bandwidth(args.bandwidth))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require_2d(Y, path):
    if Y.shape[1] < 2:
        raise UsageError(f"{path}: need at least 2 columns, got {Y.shape[1]}")
    if Y.shape[0] < 2:
        raise UsageError(f"{path}: need at least 2 rows, got {Y.shape[0]}")


# -- commands -----------------------------------------------------------------

def cmd_measure(args):
    start = time.perf_counter()
    seed = _resolve_seed(args.seed)
    Y = read_matrix(args.input)
    _require_2d(Y, args.input)
    kind = _measure_kind(args)
    try:
        value = evaluate(Y, kind)
    except MDMICAError as exc:
        raise UsageError(str(exc)) from None
    print(f"{value:.12g}")
    if args.manifest:
        argv = ["measure", args.input, "--measure", args.measure,
                "--bandwidth", args.bandwidth or "median", "--seed", str(seed),
                "--manifest", args.manifest]
        _append_jsonl(args.manifest, _manifest("measure", argv, seed, [args.input], [], start,
                                               value=value))
    return EXIT_OK


_SCHEMES = {"def": "deflation", "par": "parallel"}
_INITS = {"single": "single", "lhs": "lhs", "lhs+bo": "lhs_bo"}


def cmd_ica(args):
    start = time.perf_counter()
    seed = _resolve_seed(args.seed)
    Y = read_matrix(args.input)
    _require_2d(Y, args.input)
    try:
        cfg = OptimizerConfig(scheme=_SCHEMES[args.scheme], measure=_measure_kind(args),
                              init=_INITS[args.init], lhs_points=args.lhs_points,
                              bo_iters=args.bo_iters, bo_kernel=args.kernel, seed=seed,
                              max_iters=args.max_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = cfg.resolved(Y.shape[1])
    try:
        res = estimate_ica(Y, cfg)
    except (MDMICAError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise EstimationError(f"{type(exc).__name__}: {exc}") from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"X_hat": res.X_hat, "W_hat": res.W_hat, "H": res.H, "mean": res.mean[None, :]}
    outputs = []
    for name, A in files.items():
        write_matrix(out / f"{name}.csv", A)
        outputs.append(str(out / f"{name}.csv"))
    argv = ["ica", args.input, "--measure", args.measure,
            "--bandwidth", args.bandwidth or "median", "--scheme", args.scheme,
            "--init", args.init, "--lhs-points", str(cfg.lhs_points),
            "--bo-iters", str(cfg.bo_iters), "--kernel", args.kernel,
            "--max-iters", str(cfg.max_iters), "--seed", str(seed), "--out-dir", args.out_dir]
    manifest_path = out / "result.jsonl"
    manifest_path.unlink(missing_ok=True)
    _append_jsonl(manifest_path, _manifest(
        "ica", argv, seed, [args.input], outputs, start, config=cfg.as_dict(),
        objective=res.objective, init_objective=res.init_objective,
        evaluations=res.evaluations, n_iter=res.n_iter, theta_hat=res.theta_hat.tolist()))
    print(f"objective {res.objective!r}")
    return EXIT_OK


TABLE_FIELDS = ("kind", "model", "estimator", "trial", "seed", "d", "n", "sources", "md",
                "objective", "init_objective", "evaluations", "wall_time",
                "before_asym", "before_sym", "before_comp",
                "after_asym", "after_sym", "after_comp", "error")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def benchmark_rows(records):
    """Per-trial rows followed by mean and stderr rows per estimator."""
    rows = []
    for r in records:
        row = dict(kind="trial", model=r.model, estimator=r.estimator, trial=r.trial,
                   seed=r.seed, d=r.d, n=r.n, sources=" ".join(r.sources), md=r.md,
                   objective=r.objective, init_objective=r.init_objective,
                   evaluations=r.evaluations, wall_time=r.wall_time, error=r.error)
        for prefix, vals in (("before", r.measures_before), ("after", r.measures_after)):
            for m, v in (vals or {}).items():
                row[f"{prefix}_{m}"] = v
        rows.append(row)
    for agg in aggregate(records):
        for which in (0, 1):
            row = dict(kind=("mean", "stderr")[which], model=agg.model,
                       estimator=agg.estimator, trial=agg.trials,
                       md=(agg.md_mean, agg.md_stderr)[which],
                       objective=(agg.objective_mean, agg.objective_stderr)[which],
                       error=f"{agg.failures} failed" if agg.failures else None)
            if which == 0:
                row["wall_time"] = agg.wall_time_mean
            for prefix, vals in (("before", agg.before), ("after", agg.after)):
                for m, pair in vals.items():
                    row[f"{prefix}_{m}"] = pair[which]
            rows.append(row)
    return rows


def cmd_benchmark(args):
    start = time.perf_counter()
    seed = _resolve_seed(args.seed)
    labels = [s.strip() for s in args.estimators.split(",") if s.strip()]
    bad = [s for s in labels if s not in ESTIMATOR_LABELS]
    if bad or not labels:
        raise UsageError(f"unknown estimator label(s) {bad}; valid labels: "
                         + ", ".join(ESTIMATOR_LABELS))
    pool = BIMODAL if args.pool == "bimodal" else ModelSpec.pool
    try:
        spec = ModelSpec(args.model, d=args.d, n=args.n, pool=pool)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    records = run_trials(spec, labels, args.trials, seed=seed, jobs=args.jobs,
                         max_iters=args.max_iters)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in benchmark_rows(records):
            writer.writerow({k: _fmt(row.get(k)) for k in TABLE_FIELDS})
    manifest_path = out.with_suffix(".jsonl")
    manifest_path.unlink(missing_ok=True)
    for r in records:
        _append_jsonl(manifest_path, dict(kind="trial", **r.as_dict()))
    argv = ["benchmark", "--model", str(args.model), "--estimators", ",".join(labels),
            "--trials", str(args.trials), "--d", str(spec.d), "--n", str(args.n),
            "--pool", args.pool, "--max-iters", str(args.max_iters),
            "--seed", str(seed), "--jobs", str(args.jobs), "--out", args.out]
    _append_jsonl(manifest_path, _manifest("benchmark", argv, seed, [], [str(out)], start,
                                           model=MODELS[args.model]))
    failed = sum(not r.ok for r in records)
    print(f"{len(records)} records, {failed} failed -> {out}")
    return EXIT_OK


def cmd_md(args):
    W_hat = read_matrix(args.west)
    W0 = read_matrix(args.w0)
    try:
        rep = md_index(W_hat, W0)
    except (ShapeError, MDMICAError) as exc:
        raise UsageError(str(exc)) from None
    print(f"md {rep.md!r}")
    print("permutation " + " ".join(str(int(j)) for j in rep.permutation))
    print("scalings " + " ".join(repr(float(s)) for s in rep.scalings))
    return EXIT_OK


def cmd_replay(args):
    manifest = None
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    if obj.get("kind") == "manifest":
                        manifest = obj
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    if manifest is None:
        raise UsageError(f"{args.manifest} holds no manifest line")
    argv = list(manifest["argv"])
    if args.out is not None:
        flag = {"ica": "--out-dir", "benchmark": "--out", "measure": "--manifest"}
        key = flag.get(manifest["command"])
        if key not in argv:
            raise UsageError(f"cannot redirect output of {manifest['command']!r}")
        argv[argv.index(key) + 1] = args.out
    return main(argv)


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="mdmica", description="ICA by minimizing "
                                "distance- and kernel-based mutual dependence measures.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def measure_opts(sp, default="sym"):
        sp.add_argument("--measure", choices=MEASURES, default=default)
        sp.add_argument("--bandwidth", default="median",
                        help="'median' or kernel widths for hsic, comma separated")
        sp.add_argument("--seed", type=_nonneg_int, default=None,
                        help=f"default: ${SEED_ENV}, else 0")

    sp = sub.add_parser("measure", help="dependence measure of a data matrix")
    sp.add_argument("input")
    measure_opts(sp)
    sp.add_argument("--manifest", default=None, help="append a JSON-lines manifest here")
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("ica", help="estimate independent components")
    sp.add_argument("input")
    measure_opts(sp)
    sp.add_argument("--scheme", choices=tuple(_SCHEMES), default="par")
    sp.add_argument("--init", choices=tuple(_INITS), default="lhs")
    sp.add_argument("--lhs-points", type=_pos_int, default=None)
    sp.add_argument("--bo-iters", type=_pos_int, default=None)
    sp.add_argument("--kernel", choices=("exp", "matern52"), default="matern52")
    sp.add_argument("--max-iters", type=_pos_int, default=200)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_ica)

    sp = sub.add_parser("benchmark", help="simulation study")
    sp.add_argument("--model", type=int, choices=sorted(MODELS), default=1)
    sp.add_argument("--estimators", default="sym,comp",
                    help="comma-separated labels: " + ", ".join(ESTIMATOR_LABELS))
    sp.add_argument("--trials", type=_pos_int, default=10)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--n", type=_pos_int, default=1000)
    sp.add_argument("--pool", choices=("all", "bimodal"), default="all")
    sp.add_argument("--max-iters", type=_pos_int, default=200)
    sp.add_argument("--seed", type=_nonneg_int, default=None)
    sp.add_argument("--jobs", type=_pos_int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("md", help="MD index between an estimate and the truth")
    sp.add_argument("west")
    sp.add_argument("w0")
    sp.set_defaults(func=cmd_md)

    sp = sub.add_parser("replay", help="rerun a command from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None, help="write outputs here instead")
    sp.set_defaults(func=cmd_replay)
    return p


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mdmica: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EstimationError as exc:
        print(f"mdmica: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except Exception as exc:  # noqa: BLE001
        print(f"mdmica: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
