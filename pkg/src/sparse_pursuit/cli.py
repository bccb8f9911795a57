"""
Command-line front end.

Every subcommand writes CSV (to ``--out`` or stdout) that starts with
``#``-prefixed lines recording the resolved configuration.  Exit status is 0
on success, 1 for usage or data errors and 2 for solver or numerical errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import math
import sys
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import svg
from .errors import (
    DataFormat,
    InSpan,
    NotDetermined,
    NumericalFailure,
    RankDeficient,
    SparsePursuitError,
)
from .experiments import (
    ALGORITHMS,
    PRESETS,
    ExperimentConfig,
    cell_size,
    gen_correlated_dictionary,
    gen_gaussian_dictionary,
    make_problem,
    phase_grid,
    recovery_table,
    resolve_workers,
    solve,
)
from .guarantees import (
    backward_superset_bound,
    baseline_success_probability,
    forward_noise_bound,
    forward_success_probability,
    guarantee_report,
)
from .kernel import KERNEL_ALGORITHMS, kernel_regression_experiment, load_dataset
from .linalg import Dictionary

SOLVER_ERRORS = (RankDeficient, NotDetermined, InSpan, NumericalFailure, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing


def _floats(text: str) -> List[float]:
    """``"0.1,0.2"`` or ``"start:stop:count"`` (inclusive linear grid)."""
    try:
        if ":" in text:
            a, b, c = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(c))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}: {exc}") from None


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _algs(choices: Sequence[str]):
    def parse(text: str) -> List[str]:
        out = [a.strip() for a in text.split(",") if a.strip()]
        bad = [a for a in out if a not in choices]
        if bad or not out:
            raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {', '.join(choices)}")
        return out

    return parse


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


# ---------------------------------------------------------------- output


class Output:
    """CSV sink with a resolved-configuration header."""

    def __init__(self, args, command: str):
        self.path = args.out
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.buf.write(f"# command={command}\n")
        for key in sorted(vars(args)):
            # worker count never changes results, so it stays out of the header
            if key in ("func", "out", "command", "workers"):
                continue
            val = getattr(args, key)
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            self.buf.write(f"# {key}={val}\n")
        if not args.deterministic:
            stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            self.buf.write(f"# generated={stamp}\n")

    def row(self, values: Iterable) -> None:
        self.writer.writerow([_cell(v) for v in values])

    def close(self) -> None:
        text = self.buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(str(int(i)) for i in v)
    return str(v)


def _wall(ns: int, args) -> int:
    return 0 if args.deterministic else int(ns)


# ---------------------------------------------------------------- subcommands


def _load_matrix(path) -> np.ndarray:
    """Every column of the file (``load_dataset`` splits off the last)."""
    X, last = load_dataset(path)
    return np.column_stack([X, last])


def cmd_recover(args) -> int:
    if args.problem:
        data = _load_matrix(args.problem)
        A, y = data[:, :-1], data[:, -1]
        d = Dictionary.from_array(A)
        # rescaling columns changes coefficients, not supports
        if args.delta is None:
            raise UsageError("--delta is required with --problem")
        delta, truth, k, seed = args.delta, None, "", ""
    else:
        if None in (args.n, args.m, args.k):
            raise UsageError("generator input needs --n, --m and --k (or pass --problem FILE)")
        p = make_problem(args.gen, args.n, args.m, args.k, args.noise, args.seed, args.P)
        d, y = p.dictionary, p.y
        delta = args.delta if args.delta is not None else 2.0 * p.noise_norm
        truth, k, seed = p.support_true, args.k, args.seed
    if args.sigma is not None and args.alg in ("rmp_sigma", "fsbl"):
        delta = args.sigma
    t0 = time.perf_counter_ns()
    path = solve(d, y, args.alg, delta, {"nu": args.nu})
    elapsed = time.perf_counter_ns() - t0
    out = Output(args, "recover")
    out.row(["algorithm", "n", "m", "k", "seed", "delta", "support", "exact_recovery",
             "residual_norm", "iterations", "wall_time_ns"])
    exact = "" if truth is None else tuple(path.final_support) == tuple(truth)
    out.row([args.alg, d.n, d.m, k, seed, delta, path.final_support, exact,
             path.residual_norm, path.iterations, _wall(elapsed, args)])
    out.close()
    return 0


def _bounds_dictionary(args) -> Dictionary:
    if args.matrix:
        return Dictionary.from_array(_load_matrix(args.matrix))
    if args.gen == "identity":
        return Dictionary.from_array(np.eye(args.n, args.m))
    if args.gen == "gaussian":
        return gen_gaussian_dictionary(args.n, args.m, args.seed)
    return gen_correlated_dictionary(args.n, args.m, args.P, args.seed)


def cmd_bounds(args) -> int:
    out = Output(args, "bounds")
    out.row(["quantity", "delta", "value"])
    deltas = args.deltas or []
    curves: Dict[str, tuple] = {"bound1": ([], []), "bound2": ([], []), "baseline": ([], [])}

    def curve_rows(mu1_k, mu1_2k, m, k):
        for dl in deltas:
            if mu1_k < 1 and mu1_2k < 1:
                b1, b2 = forward_success_probability(mu1_k, mu1_2k, m, k, dl)
            else:
                b1, b2 = 0.0, None
            base = baseline_success_probability(m, dl)
            out.row(["prob_bound1", dl, b1])
            out.row(["prob_bound2", dl, "" if b2 is None else b2])
            out.row(["prob_baseline", dl, base])
            for name, v in (("bound1", b1), ("bound2", b2), ("baseline", base)):
                if v is not None:
                    curves[name][0].append(dl)
                    curves[name][1].append(v)

    if args.mu1_k is not None:
        if args.m is None or args.k is None:
            raise UsageError("--mu1-k needs --m and --k")
        mu1_2k = args.mu1_2k if args.mu1_2k is not None else args.mu1_k
        out.row(["mu1_k", "", args.mu1_k])
        out.row(["mu1_2k", "", mu1_2k])
        out.row(["fwd_bound", "", forward_noise_bound(args.mu1_k, args.x_min)])
        if args.mu1_k < 1:
            out.row(["superset_bound", "", backward_superset_bound(args.mu1_k, args.x_min)])
        curve_rows(args.mu1_k, mu1_2k, args.m, args.k)
    else:
        if args.k is None:
            raise UsageError("--k is required")
        if not args.matrix and (args.n is None or args.m is None):
            raise UsageError("generator input needs --n and --m (or pass --matrix FILE)")
        d = _bounds_dictionary(args)
        rep = guarantee_report(d, args.k, args.x_min, args.support, ())
        out.row(["mu", "", rep.mu])
        for j, v in sorted(rep.mu1.items()):
            out.row([f"mu1({j})", "", v])
        if rep.erc_value is not None:
            out.row(["erc", "", rep.erc_value])
        out.row(["sigma_min", "", rep.sigma_min])
        out.row(["fwd_bound", "", rep.fwd_bound])
        out.row(["bwd_bound", "", "" if rep.bwd_bound is None else rep.bwd_bound])
        out.row(["superset_bound", "", "" if rep.superset_bound is None else rep.superset_bound])
        mu1_k = rep.mu1[args.k]
        mu1_2k = rep.mu1[min(2 * args.k, d.m - 1)]
        curve_rows(mu1_k, mu1_2k, d.m, args.k)
    out.close()
    if args.svg and deltas:
        svg.write(args.svg, svg.curves({k: v for k, v in curves.items() if v[0]},
                                       title="success probability lower bounds",
                                       x_name="delta", y_name="probability"))
    return 0


def _config_from(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        kind=args.gen,
        noise=args.noise,
        delta_factor=args.delta_factor,
        trials=args.trials,
        algorithms=tuple(args.algs),
        seed=args.seed,
        workers=resolve_workers(args.workers),
        P=args.P,
        **extra,
    )


def cmd_phase(args) -> int:
    cfg = _config_from(args, m=args.m, n_ratios=tuple(args.n_ratios), k_ratios=tuple(args.k_ratios))
    grid = phase_grid(cfg)
    out = Output(args, "phase")
    out.row(["n_ratio", "k_ratio", "algorithm", "frequency", "half_width", "trials"])
    for r in grid.rows():
        out.row([r["n_ratio"], r["k_ratio"], r["algorithm"],
                 "" if not np.isfinite(r["frequency"]) else r["frequency"],
                 "" if not np.isfinite(r["half_width"]) else r["half_width"], r["trials"]])
    out.close()
    if args.svg:
        base = Path(args.svg)
        for a, f in grid.frequency.items():
            target = base if len(grid.frequency) == 1 else base.with_name(f"{base.stem}_{a}{base.suffix or '.svg'}")
            svg.write(target, svg.heatmap(f, grid.n_ratios, grid.k_ratios, title=f"{a}: recovery frequency"))
    return 0


def cmd_table(args) -> int:
    preset = PRESETS[args.preset]
    ks = tuple(args.ks) if args.ks else preset.ks
    args.gen = args.gen or preset.kind
    cfg = _config_from(args, n=args.n or preset.n, m=args.m or preset.m, ks=ks)
    rows, trials = recovery_table(cfg, keep_trials=bool(args.trials_out))
    out = Output(args, "table")
    out.row(["algorithm", "k", "frequency", "half_width", "trials"])
    for r in rows:
        out.row([r["algorithm"], r["k"], r["frequency"], r["half_width"], r["trials"]])
    out.close()
    if args.trials_out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment_id", "algorithm", "n", "m", "k", "seed", "exact_recovery",
                    "residual_norm", "wall_time_ns"])
        for k, t in trials:
            w.writerow([args.preset, t.algorithm, cfg.n, cfg.m, k, t.seed, int(t.exact_recovery),
                        repr(float(t.residual_norm)), _wall(t.wall_time_ns, args)])
        Path(args.trials_out).write_text(buf.getvalue())
    return 0


def cmd_kernel(args) -> int:
    X, y = load_dataset(args.data, response_column=args.response_column)
    deltas = args.deltas
    if deltas is None:
        deltas = list(float(np.std(y)) * np.geomspace(0.05, 1.0, 8))
    seeds = [args.seed * 1000 + s for s in range(args.splits)]
    res = kernel_regression_experiment(X, y, seeds, deltas, ell=args.ell, algorithms=args.algs,
                                       center=not args.no_center)
    out = Output(args, "kernel")
    out.row(["algorithm", "split", "delta", "sparsity", "rmse"])
    for r in res:
        out.row([r.algorithm, r.split, r.delta, r.sparsity, "" if r.error else r.rmse])
    out.close()
    if args.svg:
        series = {}
        for r in res:
            if r.error is None:
                xs, ys = series.setdefault(r.algorithm, ([], []))
                xs.append(r.sparsity)
                ys.append(r.rmse)
        svg.write(args.svg, svg.scatter(series, title="test RMSE vs sparsity",
                                        x_name="sparsity", y_name="test RMSE"))
    return 0


def cmd_bench(args) -> int:
    rows = []
    for m in sorted(args.sizes):
        n = max(1, int(round(args.n_ratio * m)))
        k = max(1, int(math.ceil(args.k_ratio * m)))
        if k > n:
            raise UsageError(f"size m={m} gives k={k} > n={n}")
        for a in sorted(args.algs):
            times, hits = [], 0
            for rep in range(args.repeats):
                p = make_problem(args.gen, n, m, k, args.noise, args.seed + rep, args.P)
                t0 = time.perf_counter_ns()
                path = solve(p.dictionary, p.y, a, 2.0 * p.noise_norm)
                times.append(time.perf_counter_ns() - t0)
                hits += tuple(path.final_support) == p.support_true
            rows.append([m, n, k, a, args.repeats, hits, _wall(int(np.median(times)), args)])
    out = Output(args, "bench")
    out.row(["m", "n", "k", "algorithm", "repeats", "exact_recoveries", "median_wall_time_ns"])
    for r in rows:
        out.row(r)
    out.close()
    return 0


# ---------------------------------------------------------------- parser


def _common(p, workers=False):
    p.add_argument("--out", "-o", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--deterministic", action="store_true",
                   help="omit the timestamp line and report zero wall times")
    if workers:
        p.add_argument("--workers", type=_positive_int, default=None,
                       help="worker processes (default: $SPARSE_PURSUIT_WORKERS or CPU count)")


def _generator(p, default="gaussian", choices=("gaussian", "correlated")):
    p.add_argument("--gen", choices=choices, default=default, help="random dictionary family")
    p.add_argument("--P", type=_positive_int, default=None,
                   help="number of rank-one terms for the correlated family (default: n)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-pursuit", description="Sparse support recovery toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("recover", help="solve one instance")
    _common(p)
    _generator(p)
    p.add_argument("--alg", required=True, choices=ALGORITHMS)
    p.add_argument("--problem", help="delimited text: dictionary columns then the target as last column")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--noise", type=_nonneg, default=1e-2, help="noise radius ||eps||")
    p.add_argument("--delta", type=_nonneg, default=None,
                   help="tolerance delta (default: 2 ||eps|| for generated problems)")
    p.add_argument("--sigma", type=_positive, default=None, help="noise level for rmp_sigma / fsbl")
    p.add_argument("--nu", type=float, default=0.5, help="FoBa backward ratio")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("bounds", help="coherence statistics and recovery guarantees")
    _common(p)
    _generator(p, default="identity", choices=("identity", "gaussian", "correlated"))
    p.add_argument("--matrix", help="delimited text matrix (columns are normalized)")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--x-min", type=_positive, default=1.0, help="smallest non-zero |x_i|")
    p.add_argument("--support", type=_ints, default=None, help="support for the ERC, e.g. 0,3,5")
    p.add_argument("--deltas", type=_floats, default=None,
                   help="delta grid for probability curves: list or start:stop:count")
    p.add_argument("--mu1-k", type=float, default=None, help="use this Babel value instead of a matrix")
    p.add_argument("--mu1-2k", type=float, default=None, help="Babel value at 2k (default: --mu1-k)")
    p.add_argument("--svg", help="write probability curves to this SVG")
    p.set_defaults(func=cmd_bounds)

    ph = PRESETS["phase"]
    p = sub.add_parser("phase", help="recovery frequency over sampling and sparsity ratios")
    _common(p, workers=True)
    _generator(p)
    p.add_argument("--m", type=_positive_int, default=ph.m)
    p.add_argument("--n-ratios", type=_floats, default=list(ph.n_ratios))
    p.add_argument("--k-ratios", type=_floats, default=list(ph.k_ratios))
    p.add_argument("--trials", type=int, default=ph.trials)
    p.add_argument("--noise", type=_nonneg, default=ph.noise)
    p.add_argument("--delta-factor", type=_nonneg, default=2.0, help="delta = factor * ||eps||")
    p.add_argument("--algs", type=_algs(ALGORITHMS), default=list(ph.algorithms))
    p.add_argument("--svg", help="heatmap path (one file per algorithm when several)")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("table", help="recovery-frequency table")
    _common(p, workers=True)
    _generator(p, default=None)
    p.add_argument("--preset", choices=("table1", "table2"), default="table1")
    p.add_argument("--ks", type=_ints, default=None, help="sparsity levels, e.g. 12,16")
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--m", type=_positive_int, default=None)
    p.add_argument("--trials", type=int, default=1024)
    p.add_argument("--noise", type=_nonneg, default=1e-2)
    p.add_argument("--delta-factor", type=_nonneg, default=2.0)
    p.add_argument("--algs", type=_algs(ALGORITHMS), default=list(PRESETS["table1"].algorithms))
    p.add_argument("--trials-out", help="also write one CSV row per (trial, algorithm)")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("kernel", help="sparse kernel regression on a dataset")
    _common(p)
    p.add_argument("--data", required=True, help="delimited text; last column is the response")
    p.add_argument("--response-column", type=int, default=-1)
    p.add_argument("--splits", type=_positive_int, default=10, help="random 75/25 splits")
    p.add_argument("--deltas", type=_floats, default=None,
                   help="tolerance grid in response units (default: 8 values from 0.05 to 1 std(y))")
    p.add_argument("--ell", type=_positive, default=None, help="Matern lengthscale (default: sqrt(d))")
    p.add_argument("--algs", type=_algs(KERNEL_ALGORITHMS), default=list(KERNEL_ALGORITHMS))
    p.add_argument("--no-center", action="store_true", help="do not subtract the training mean response")
    p.add_argument("--svg", help="write an RMSE-vs-sparsity scatter plot")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("bench", help="wall-clock timings (informational)")
    _common(p)
    _generator(p)
    p.add_argument("--sizes", type=_ints, default=[64, 128, 256], help="values of m")
    p.add_argument("--n-ratio", type=_positive, default=0.5)
    p.add_argument("--k-ratio", type=_positive, default=0.25, help="k / m")
    p.add_argument("--noise", type=_nonneg, default=1e-2)
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--algs", type=_algs(ALGORITHMS), default=["fr", "omp", "rmp0", "rmp_sigma"])
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SOLVER_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormat as exc:
        print(f"error: DataFormat: {exc}", file=sys.stderr)
        return 1
    except (SparsePursuitError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
