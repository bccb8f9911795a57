"""
Synthetic support-recovery experiments.

Every trial derives its own 64-bit seed from ``(master seed, cell, trial
index)`` so results never depend on the number of workers or on scheduling
order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadArity, SparsePursuitError
from .linalg import Dictionary
from .sbl import fsbl, rmp_sigma
from .stepwise import StopRule, backward_regression, foba, forward_regression, omp, rmp0

__all__ = [
    "ALGORITHMS",
    "RecoveryProblem",
    "TrialResult",
    "ExperimentConfig",
    "gen_gaussian_dictionary",
    "gen_correlated_dictionary",
    "gen_sparse_signal",
    "gen_noise",
    "make_problem",
    "trial_seed",
    "run_trial",
    "run_trials",
    "recovery_table",
    "phase_grid",
    "half_width",
    "resolve_workers",
    "PRESETS",
]

ALGORITHMS = ("omp", "fr", "br", "rmp0", "rmp0_plus", "foba", "fsbl", "rmp_sigma")
TABLE_ALGORITHMS = ("omp", "fr", "foba", "rmp0", "rmp0_plus", "fsbl", "rmp_sigma")

# floor on the SBL noise parameter when the configured noise is zero
MIN_SIGMA = 1e-6


def gen_gaussian_dictionary(n: int, m: int, seed) -> Dictionary:
    """I.i.d. standard normal entries, columns scaled to unit norm."""
    if n < 1 or m < 1:
        raise BadArity(f"need n, m >= 1, got {n}x{m}")
    rng = np.random.default_rng(seed)
    return Dictionary.from_array(rng.standard_normal((n, m)))


def gen_correlated_dictionary(n: int, m: int, P: Optional[int] = None, seed=None) -> Dictionary:
    """``sum_{p=1}^{P} p^-2 u_p v_p^T`` with standard normal ``u_p, v_p``,
    columns scaled to unit norm.  ``P`` defaults to ``n``."""
    if n < 1 or m < 1:
        raise BadArity(f"need n, m >= 1, got {n}x{m}")
    P = n if P is None else int(P)
    if P < 1:
        raise BadArity("P must be at least 1")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, P))
    V = rng.standard_normal((m, P))
    w = 1.0 / np.arange(1, P + 1) ** 2
    return Dictionary.from_array((U * w) @ V.T)


def gen_sparse_signal(m: int, k: int, seed) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Uniformly random ``k``-subset carrying independent random signs."""
    if not 1 <= k <= m:
        raise BadArity(f"need 1 <= k <= m, got k={k}, m={m}")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(m, size=k, replace=False))
    x = np.zeros(m)
    x[support] = rng.choice([-1.0, 1.0], size=k)
    return x, tuple(int(i) for i in support)


def gen_noise(n: int, radius: float, seed) -> np.ndarray:
    """Uniform on the sphere of the given radius in ``R^n``."""
    if radius < 0:
        raise BadArity("radius must be non-negative")
    if radius == 0:
        return np.zeros(n)
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    e *= radius / np.linalg.norm(e)
    return e


@dataclass(frozen=True)
class RecoveryProblem:
    dictionary: Dictionary
    y: np.ndarray
    x_true: np.ndarray
    support_true: Tuple[int, ...]
    noise: np.ndarray
    seed: int
    kind: str

    @property
    def noise_norm(self) -> float:
        return float(np.linalg.norm(self.noise))


def make_problem(
    kind: str, n: int, m: int, k: int, noise: float, seed: int, P: Optional[int] = None
) -> RecoveryProblem:
    """Build ``y = Phi x + eps`` from one seed (split three ways)."""
    ss_dict, ss_signal, ss_noise = np.random.SeedSequence(seed).spawn(3)
    if kind == "gaussian":
        d = gen_gaussian_dictionary(n, m, ss_dict)
    elif kind == "correlated":
        d = gen_correlated_dictionary(n, m, P, ss_dict)
    else:
        raise BadArity(f"unknown matrix kind {kind!r}")
    x, support = gen_sparse_signal(m, k, ss_signal)
    eps = gen_noise(n, noise, ss_noise)
    return RecoveryProblem(d, d.data @ x + eps, x, support, eps, int(seed), kind)


@dataclass
class TrialResult:
    algorithm: str
    support: Tuple[int, ...]
    exact_recovery: bool
    residual_norm: float
    wall_time_ns: int
    seed: int
    error: Optional[str] = None


def solve(problem_or_dict, y, algorithm: str, delta: float, params: Optional[dict] = None):
    """Run one named algorithm with tolerance ``delta``; returns a SelectionPath.

    ``delta`` is a residual-norm target for ``omp`` and ``fr``, a marginal
    improvement tolerance (compared with squared residual changes) for
    ``br``, ``rmp0``, ``rmp0_plus`` and ``foba``, and the noise standard
    deviation for ``rmp_sigma`` and ``fsbl``.
    """
    params = params or {}
    d = problem_or_dict
    if algorithm == "omp":
        return omp(d, y, StopRule.residual(delta))
    if algorithm == "fr":
        return forward_regression(d, y, StopRule.residual(delta))
    if algorithm == "br":
        return backward_regression(d, y, StopRule.improvement(delta))
    if algorithm == "rmp0":
        return rmp0(d, y, delta, iterate_outer=False)
    if algorithm == "rmp0_plus":
        return rmp0(d, y, delta, iterate_outer=True)
    if algorithm == "foba":
        return foba(d, y, delta, nu=params.get("nu", 0.5))
    if algorithm in ("rmp_sigma", "fsbl"):
        sigma = max(delta, params.get("min_sigma", MIN_SIGMA))
        fn = rmp_sigma if algorithm == "rmp_sigma" else fsbl
        return fn(d, y, sigma, delta_l=params.get("delta_l"))[1]
    raise BadArity(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def run_trial(problem: RecoveryProblem, algorithm: str, params: Optional[dict] = None) -> TrialResult:
    """Solve one problem with ``delta = delta_factor * ||eps||`` (default 2).

    Solver errors are captured in :attr:`TrialResult.error` and count as a
    failed recovery.
    """
    params = params or {}
    if algorithm not in ALGORITHMS:
        raise BadArity(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    delta = params.get("delta_factor", 2.0) * problem.noise_norm
    t0 = time.perf_counter_ns()
    try:
        path = solve(problem.dictionary, problem.y, algorithm, delta, params)
    except (SparsePursuitError, np.linalg.LinAlgError) as exc:
        return TrialResult(algorithm, (), False, float("nan"), time.perf_counter_ns() - t0,
                           problem.seed, f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter_ns() - t0
    support = tuple(int(i) for i in path.final_support)
    return TrialResult(algorithm, support, support == problem.support_true,
                       float(path.residual_norm), elapsed, problem.seed)


def trial_seed(master: int, cell: int, trial: int) -> int:
    """64-bit seed for one trial, independent of execution order."""
    ss = np.random.SeedSequence([int(master), int(cell), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    """Parameters shared by recovery tables and phase grids."""

    kind: str = "gaussian"
    n: int = 64
    m: int = 128
    ks: Tuple[int, ...] = (12, 16, 20, 24)
    n_ratios: Tuple[float, ...] = ()
    k_ratios: Tuple[float, ...] = ()
    noise: float = 1e-2
    delta_factor: float = 2.0
    trials: int = 1024
    algorithms: Tuple[str, ...] = TABLE_ALGORITHMS
    seed: int = 0
    workers: int = 1
    P: Optional[int] = None
    nu: float = 0.5

    def __post_init__(self):
        if self.trials < 1:
            raise BadArity("trial count must be at least 1")
        for r in tuple(self.n_ratios) + tuple(self.k_ratios):
            if not 0 < r <= 1:
                raise BadArity(f"ratios must lie in (0, 1], got {r}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise BadArity(f"unknown algorithm(s) {unknown}; expected a subset of {ALGORITHMS}")
        if self.kind not in ("gaussian", "correlated"):
            raise BadArity(f"unknown matrix kind {self.kind!r}")

    def params(self) -> dict:
        return {"delta_factor": self.delta_factor, "nu": self.nu}

    def as_dict(self) -> dict:
        return asdict(self)


PRESETS: Dict[str, ExperimentConfig] = {
    "table1": ExperimentConfig(kind="gaussian", ks=(12, 16, 20, 24)),
    "table2": ExperimentConfig(kind="correlated", ks=(2, 3, 4, 5)),
    "phase": ExperimentConfig(
        m=128,
        trials=256,
        n_ratios=tuple(np.round(np.linspace(0.1, 1.0, 10), 3)),
        k_ratios=tuple(np.round(np.linspace(0.1, 1.0, 10), 3)),
        algorithms=("fr", "rmp0", "rmp_sigma"),
    ),
}


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers:
        return max(1, int(workers))
    env = os.environ.get("SPARSE_PURSUIT_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _map(fn: Callable, items: Sequence, workers: int) -> List:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


@dataclass(frozen=True)
class _Job:
    kind: str
    n: int
    m: int
    k: int
    noise: float
    seed: int
    P: Optional[int]
    algorithms: Tuple[str, ...]
    params: Tuple[Tuple[str, float], ...]
    cell: Tuple = ()


def _run_job(job: _Job) -> List[TrialResult]:
    problem = make_problem(job.kind, job.n, job.m, job.k, job.noise, job.seed, job.P)
    params = dict(job.params)
    return [run_trial(problem, a, params) for a in job.algorithms]


def run_trials(jobs: Sequence[_Job], workers: int = 1) -> List[List[TrialResult]]:
    return _map(_run_job, list(jobs), workers)


def half_width(p: float, trials: int) -> float:
    """95% normal-approximation half-width of a binomial frequency."""
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def recovery_table(config: ExperimentConfig, keep_trials: bool = False):
    """Recovery frequency per (algorithm, k).

    Every algorithm sees the same problem instances.

    Returns
    -------
    rows : list of dict
        Keys ``algorithm, k, frequency, half_width, trials``.
    trials : list of (k, TrialResult)
        Only populated when ``keep_trials``.
    """
    params = tuple(sorted(config.params().items()))
    jobs = []
    for ci, k in enumerate(config.ks):
        for t in range(config.trials):
            jobs.append(_Job(config.kind, config.n, config.m, int(k), config.noise,
                             trial_seed(config.seed, ci, t), config.P,
                             tuple(config.algorithms), params, (k,)))
    results = run_trials(jobs, resolve_workers(config.workers))
    counts = {(a, k): 0 for a in config.algorithms for k in config.ks}
    kept = []
    for job, res in zip(jobs, results):
        for r in res:
            counts[(r.algorithm, job.k)] += r.exact_recovery
            if keep_trials:
                kept.append((job.k, r))
    rows = []
    for a in config.algorithms:
        for k in config.ks:
            p = counts[(a, k)] / config.trials
            rows.append({"algorithm": a, "k": int(k), "frequency": p,
                         "half_width": half_width(p, config.trials), "trials": config.trials})
    return rows, kept


@dataclass
class PhaseGrid:
    """Recovery frequencies on an ``(n/m, k/n)`` grid.

    ``frequency[a]`` has shape ``(len(k_ratios), len(n_ratios))``; rows are
    sparsity ratios, columns sampling ratios.  Skipped cells hold NaN.
    """

    n_ratios: Tuple[float, ...]
    k_ratios: Tuple[float, ...]
    m: int
    trials: int
    frequency: Dict[str, np.ndarray] = field(default_factory=dict)
    shape: Dict[Tuple[int, int], Tuple[int, int]] = field(default_factory=dict)

    def rows(self) -> List[dict]:
        out = []
        for a, f in self.frequency.items():
            for ki, kr in enumerate(self.k_ratios):
                for ni, nr in enumerate(self.n_ratios):
                    p = f[ki, ni]
                    out.append({"n_ratio": nr, "k_ratio": kr, "algorithm": a, "frequency": p,
                                "half_width": half_width(p, self.trials) if np.isfinite(p) else float("nan"),
                                "trials": self.trials if np.isfinite(p) else 0})
        return out


def cell_size(n_ratio: float, k_ratio: float, m: int) -> Tuple[int, int]:
    """``n = round(n_ratio m)``, ``k = ceil(k_ratio n_ratio m)``."""
    n = int(round(n_ratio * m))
    k = int(math.ceil(round(k_ratio * n_ratio * m, 9)))
    return n, k


def phase_grid(config: ExperimentConfig) -> PhaseGrid:
    """Recovery frequency over a grid of sampling and sparsity ratios.

    Cells where ``n < 1``, ``k < 1`` or ``k > n`` are skipped (NaN).
    """
    if not config.n_ratios or not config.k_ratios:
        raise BadArity("phase grid needs non-empty ratio grids")
    grid = PhaseGrid(tuple(config.n_ratios), tuple(config.k_ratios), config.m, config.trials)
    params = tuple(sorted(config.params().items()))
    jobs = []
    for ki, kr in enumerate(config.k_ratios):
        for ni, nr in enumerate(config.n_ratios):
            n, k = cell_size(nr, kr, config.m)
            grid.shape[(ki, ni)] = (n, k)
            if n < 1 or k < 1 or k > n:
                continue
            cell = ki * len(config.n_ratios) + ni
            for t in range(config.trials):
                jobs.append(_Job(config.kind, n, config.m, k, config.noise,
                                 trial_seed(config.seed, cell, t), config.P,
                                 tuple(config.algorithms), params, (ki, ni)))
    results = run_trials(jobs, resolve_workers(config.workers))
    shape = (len(config.k_ratios), len(config.n_ratios))
    for a in config.algorithms:
        grid.frequency[a] = np.full(shape, np.nan)
    counts: Dict[Tuple[str, int, int], int] = {}
    for job, res in zip(jobs, results):
        for r in res:
            key = (r.algorithm,) + job.cell
            counts[key] = counts.get(key, 0) + r.exact_recovery
    for (a, ki, ni), c in counts.items():
        grid.frequency[a][ki, ni] = c / config.trials
    return grid
