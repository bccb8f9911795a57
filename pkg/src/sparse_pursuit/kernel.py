"""
Sparse kernel regression: ``f(x) = sum_j k(x, x_j) w_j`` over training points.

The dictionary is the train kernel matrix with unit-normalized columns; the
fitted weights are divided by the column norms before prediction.  By
default the response is centered on the training mean, which stands in for
an intercept; pass ``center=False`` for data that follows the kernel model
exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .errors import BadArity, DataFormat, SparsePursuitError
from .linalg import Dictionary, ls_solve
from .sbl import fsbl, rmp_sigma
from .stepwise import StopRule, foba, forward_regression, rmp0

__all__ = [
    "KERNEL_ALGORITHMS",
    "KernelResult",
    "matern32",
    "matern32_matrix",
    "load_dataset",
    "write_dataset",
    "standardize",
    "train_test_split",
    "kernel_regression_experiment",
    "forward_frontier",
    "matched_comparison",
    "synthetic_kernel_data",
]

KERNEL_ALGORITHMS = ("fr", "foba", "rmp0", "rmp0_plus", "fsbl", "rmp_sigma")

_SQRT3 = math.sqrt(3.0)


def matern32(x, x2, ell: float) -> float:
    """``(1 + sqrt(3) r / ell) exp(-sqrt(3) r / ell)`` with ``r = ||x - x2||``."""
    if not ell > 0:
        raise BadArity(f"lengthscale must be positive, got {ell}")
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(x2, float)))
    t = _SQRT3 * r / ell
    return (1.0 + t) * math.exp(-t)


def matern32_matrix(X, Z, ell: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = matern32(X[i], Z[j], ell)``."""
    if not ell > 0:
        raise BadArity(f"lengthscale must be positive, got {ell}")
    t = (_SQRT3 / ell) * cdist(np.atleast_2d(X), np.atleast_2d(Z))
    return (1.0 + t) * np.exp(-t)


def _split_line(line: str, delimiter: Optional[str]) -> List[str]:
    if delimiter is not None:
        return [c.strip() for c in line.split(delimiter)]
    if "," in line:
        return [c.strip() for c in line.split(",")]
    return line.split()


def load_dataset(
    path, response_column: int = -1, delimiter: Optional[str] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Read a comma- or whitespace-delimited numeric table.

    A first row with any non-numeric cell is treated as a header.  Blank
    lines and lines starting with ``#`` are ignored.

    Returns
    -------
    X : ndarray, shape (rows, columns - 1)
    y : ndarray, shape (rows,)

    Raises
    ------
    DataFormat
        On ragged rows, empty or non-numeric cells, or an empty table.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormat(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows: List[List[float]] = []
    width = None
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = _split_line(line, delimiter)
        values = []
        bad = None
        for col, cell in enumerate(cells, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                bad = (col, cell)
                break
        if bad is not None:
            if first and not rows:
                first = False
                width = len(cells)
                continue
            col, cell = bad
            what = "empty cell" if cell == "" else f"non-numeric cell {cell!r}"
            raise DataFormat(f"{path}: line {lineno}, column {col}: {what}")
        first = False
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataFormat(f"{path}: line {lineno}: expected {width} columns, found {len(values)}")
        rows.append(values)
    if not rows:
        raise DataFormat(f"{path}: no data rows")
    if width < 2:
        raise DataFormat(f"{path}: need at least one feature column and a response column")
    data = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        r, c = np.argwhere(~np.isfinite(data))[0]
        raise DataFormat(f"{path}: data row {r + 1}, column {c + 1}: non-finite value")
    rc = response_column % width
    return np.delete(data, rc, axis=1), data[:, rc].copy()


def write_dataset(path, X, y, header: Optional[Sequence[str]] = None) -> None:
    """Write ``[X | y]`` as CSV with full float precision (round-trips exactly)."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float).ravel()
    if X.shape[0] != y.shape[0]:
        raise BadArity("X and y have different row counts")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row, target in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def standardize(X_train, X_test=None):
    """Zero mean, unit variance using training statistics only.

    Constant features are centered and left unscaled.
    """
    X_train = np.asarray(X_train, float)
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std[std == 0] = 1.0
    out_train = (X_train - mean) / std
    if X_test is None:
        return out_train
    return out_train, (np.asarray(X_test, float) - mean) / std


def train_test_split(rows: int, seed, train_fraction: float = 0.75) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(rows)
    cut = int(round(train_fraction * rows))
    if not 1 <= cut < rows:
        raise BadArity(f"split leaves an empty train or test set ({rows} rows)")
    return np.sort(perm[:cut]), np.sort(perm[cut:])


@dataclass(frozen=True)
class KernelResult:
    algorithm: str
    split: int
    delta: float
    sparsity: int
    rmse: float
    error: Optional[str] = None


def _fit(d: Dictionary, y: np.ndarray, algorithm: str, delta: float) -> np.ndarray:
    """Coefficients on the normalized dictionary."""
    if algorithm == "fr":
        return forward_regression(d, y, StopRule.improvement(delta)).coeffs
    if algorithm == "foba":
        return foba(d, y, delta).coeffs
    if algorithm in ("rmp0", "rmp0_plus"):
        return rmp0(d, y, delta, iterate_outer=algorithm == "rmp0_plus").coeffs
    if algorithm in ("fsbl", "rmp_sigma"):
        fn = rmp_sigma if algorithm == "rmp_sigma" else fsbl
        return fn(d, y, max(delta, 1e-6))[1].coeffs
    raise BadArity(f"unknown algorithm {algorithm!r}; expected one of {KERNEL_ALGORITHMS}")


def _prepare(X, y, seed, ell, train_fraction, scale_features, center):
    tr, te = train_test_split(len(y), seed, train_fraction)
    if scale_features:
        Xtr, Xte = standardize(X[tr], X[te])
    else:
        Xtr, Xte = X[tr], X[te]
    offset = float(y[tr].mean()) if center else 0.0
    K = matern32_matrix(Xtr, Xtr, ell)
    norms = np.linalg.norm(K, axis=0)
    d = Dictionary(np.asfortranarray(K / norms), normalized=True)
    Kte = matern32_matrix(Xte, Xtr, ell)
    return d, y[tr] - offset, Kte / norms, y[te] - offset


def _rmse(Kte_scaled: np.ndarray, coeffs: np.ndarray, y_te: np.ndarray) -> float:
    return float(np.sqrt(np.mean((Kte_scaled @ coeffs - y_te) ** 2)))


def kernel_regression_experiment(
    X,
    y,
    split_seeds: Iterable[int],
    deltas: Sequence[float],
    ell: Optional[float] = None,
    algorithms: Sequence[str] = KERNEL_ALGORITHMS,
    train_fraction: float = 0.75,
    scale_features: bool = True,
    center: bool = True,
) -> List[KernelResult]:
    """Fit every algorithm for every ``(split, delta)`` pair.

    ``delta`` is in response units: the noise standard deviation for the
    SBL solvers, and the marginal improvement tolerance (compared with
    squared residual changes) for the stepwise ones.  ``ell`` defaults to
    ``sqrt(d)``.  Solver errors are recorded, not raised.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DataFormat(f"{X.shape[0]} feature rows but {y.shape[0]} responses")
    ell = math.sqrt(X.shape[1]) if ell is None else float(ell)
    if not ell > 0:
        raise BadArity(f"lengthscale must be positive, got {ell}")
    if any(not dl >= 0 for dl in deltas):
        raise BadArity("tolerances must be non-negative")
    bad = [a for a in algorithms if a not in KERNEL_ALGORITHMS]
    if bad:
        raise BadArity(f"unknown algorithm(s) {bad}; expected a subset of {KERNEL_ALGORITHMS}")
    out: List[KernelResult] = []
    for split, seed in enumerate(split_seeds):
        d, ytr, Kte, yte = _prepare(X, y, seed, ell, train_fraction, scale_features, center)
        for delta in deltas:
            for a in algorithms:
                try:
                    c = _fit(d, ytr, a, float(delta))
                except (SparsePursuitError, np.linalg.LinAlgError) as exc:
                    out.append(KernelResult(a, split, float(delta), 0, float("nan"),
                                            f"{type(exc).__name__}: {exc}"))
                    continue
                out.append(KernelResult(a, split, float(delta), int(np.count_nonzero(c)),
                                        _rmse(Kte, c, yte)))
    return out


def forward_frontier(
    X, y, split_seed, max_sparsity: int, ell: Optional[float] = None,
    train_fraction: float = 0.75, scale_features: bool = True, center: bool = True,
) -> np.ndarray:
    """Test RMSE of Forward Regression at every sparsity ``1..max_sparsity``.

    One forward path serves all sparsities, since truncating the path at
    ``s`` steps is exactly the ``s``-step solution.  Entry ``s - 1`` holds
    the RMSE at sparsity ``s``; NaN past the end of the path.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float).ravel()
    ell = math.sqrt(X.shape[1]) if ell is None else float(ell)
    d, ytr, Kte, yte = _prepare(X, y, split_seed, ell, train_fraction, scale_features, center)
    path = forward_regression(d, ytr, StopRule.sparsity(max_sparsity))
    order = [i for a, i in path.actions(("add",))]
    out = np.full(max_sparsity, np.nan)
    for s in range(1, len(order) + 1):
        coeffs, _ = ls_solve(d, order[:s], ytr)
        full = np.zeros(d.m)
        full[order[:s]] = coeffs
        out[s - 1] = _rmse(Kte, full, yte)
    return out


def matched_comparison(
    results: Sequence[KernelResult], frontier: Dict[int, np.ndarray], algorithm: str = "rmp0_plus",
    quantiles: Tuple[float, float] = (0.25, 0.75),
) -> Dict[int, Optional[bool]]:
    """Per split, whether ``algorithm`` beats the forward frontier on average.

    The matched mid-range is the set of sparsities reached by ``algorithm``
    between the given quantiles of its own achieved sparsities in that
    split, the lower one rounded down and the upper one rounded up to an
    achieved value.  At each such sparsity its best RMSE is compared with the
    forward RMSE at the same sparsity; the split counts as a win when the
    mean difference is ``<= 0``.  Splits without a comparable sparsity map
    to ``None``.
    """
    out: Dict[int, Optional[bool]] = {}
    for split, fr in frontier.items():
        best: Dict[int, float] = {}
        for r in results:
            if r.split == split and r.algorithm == algorithm and r.error is None and r.sparsity > 0:
                best[r.sparsity] = min(best.get(r.sparsity, np.inf), r.rmse)
        if not best:
            out[split] = None
            continue
        achieved = sorted(best)
        # inclusive band: never empty, even with only two achieved sparsities
        lo = np.quantile(achieved, quantiles[0], method="lower")
        hi = np.quantile(achieved, quantiles[1], method="higher")
        diffs = [best[s] - fr[s - 1] for s in best
                 if lo <= s <= hi and s <= len(fr) and np.isfinite(fr[s - 1])]
        out[split] = (float(np.mean(diffs)) <= 0.0) if diffs else None
    return out


def synthetic_kernel_data(
    rows: int, dim: int, centers: int, noise: float, seed, ell: Optional[float] = None,
    train_fraction: float = 0.75, split_seed=0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Data drawn from the kernel model with a known sparse weight vector.

    Features are standard normal; the ``centers`` kernel centers are chosen
    among the rows that land in the training set of ``split_seed``, so the
    generating function lies in the span of the train dictionary.

    Returns ``(X, y, f)`` where ``f`` is the noiseless response.
    """
    if not 1 <= centers <= rows:
        raise BadArity(f"need 1 <= centers <= rows, got {centers}")
    rng = np.random.default_rng(seed)
    ell = math.sqrt(dim) if ell is None else float(ell)
    X = rng.standard_normal((rows, dim))
    tr, _ = train_test_split(rows, split_seed, train_fraction)
    idx = rng.choice(tr, size=centers, replace=False)
    w = rng.choice([-1.0, 1.0], size=centers) * rng.uniform(0.5, 1.5, size=centers)
    f = matern32_matrix(X, X[idx], ell) @ w
    return X, f + noise * rng.standard_normal(rows), f
