"""
Greedy support selection on top of :class:`~sparse_pursuit.linalg.ActiveModel`.

All algorithms break ties toward the lowest column index and never grow the
active set beyond ``min(n, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .errors import NotDetermined, RankDeficient
from .linalg import ActiveModel, as_dictionary

__all__ = [
    "StopRule",
    "Step",
    "SelectionPath",
    "forward_regression",
    "omp",
    "backward_regression",
    "rmp0",
    "foba",
]

# squared-residual changes below (ZERO_RTOL * ||y||)^2 are round-off
ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class StopRule:
    """When a greedy algorithm halts.

    ``kind`` is one of

    * ``"sparsity"``: stop once the active set holds ``value`` columns;
    * ``"residual"``: stop once ``||r_A|| <= value``;
    * ``"improvement"``: stop once the best squared-residual change is
      ``<= value**2`` (``value`` is the tolerance ``delta``).
    """

    kind: str
    value: float

    KINDS = ("sparsity", "residual", "improvement")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stop rule {self.kind!r}; expected one of {self.KINDS}")
        if not self.value >= 0:
            raise ValueError(f"stop value must be non-negative, got {self.value}")
        if self.kind == "sparsity" and int(self.value) != self.value:
            raise ValueError("sparsity target must be an integer")

    @classmethod
    def sparsity(cls, k: int) -> "StopRule":
        return cls("sparsity", int(k))

    @classmethod
    def residual(cls, delta: float) -> "StopRule":
        return cls("residual", float(delta))

    @classmethod
    def improvement(cls, delta: float) -> "StopRule":
        return cls("improvement", float(delta))


class Step(tuple):
    """``(action, index, residual_norm_after)``."""

    __slots__ = ()

    def __new__(cls, action: str, index: int, residual_norm: float):
        return super().__new__(cls, (action, int(index), float(residual_norm)))

    action = property(lambda self: self[0])
    index = property(lambda self: self[1])
    residual_norm = property(lambda self: self[2])


@dataclass
class SelectionPath:
    """Record of a greedy run.

    Attributes
    ----------
    steps : list of Step
        Every add / remove (and, for SBL solvers, update) in order.
    final_support : tuple of int
        Sorted indices of the returned support.
    iterations : int
        Number of steps taken.
    outer_iterations : int
        Forward/backward passes (1 for single-phase algorithms).
    coeffs : ndarray, shape (m,)
        Coefficients on the final support, zero elsewhere.
    residual_norm : float
    converged : bool
        False when an iteration cap ended the run.
    """

    steps: List[Step] = field(default_factory=list)
    final_support: Tuple[int, ...] = ()
    iterations: int = 0
    outer_iterations: int = 1
    coeffs: Optional[np.ndarray] = None
    residual_norm: float = float("nan")
    converged: bool = True

    def record(self, action: str, index: int, residual_norm: float) -> None:
        self.steps.append(Step(action, index, residual_norm))

    def replay(self) -> Tuple[int, ...]:
        support = set()
        for action, i, _ in self.steps:
            if action == "add":
                support.add(i)
            elif action == "remove":
                support.discard(i)
        return tuple(sorted(support))

    def actions(self, kinds: Iterable[str] = ("add", "remove")) -> List[Tuple[str, int]]:
        kinds = set(kinds)
        return [(a, i) for a, i, _ in self.steps if a in kinds]


def _finish(path: SelectionPath, model: ActiveModel) -> SelectionPath:
    path.final_support = tuple(sorted(model.active))
    path.iterations = len(path.steps)
    path.coeffs = model.full_coeffs()
    path.residual_norm = model.residual_norm
    return path


def _floor(model: ActiveModel) -> float:
    return (ZERO_RTOL * model.y_norm) ** 2


def _try_add(model: ActiveModel, scores: np.ndarray, path: SelectionPath) -> Optional[int]:
    """Add the best-scoring column, skipping any that turn out dependent."""
    scores = scores.copy()
    while True:
        i = int(np.argmax(scores))
        if not np.isfinite(scores[i]):
            return None
        try:
            model.add(i)
        except RankDeficient:
            scores[i] = -np.inf
            continue
        path.record("add", i, model.residual_norm)
        return i


def _forward(dictionary, y, stop: StopRule, rule: str) -> SelectionPath:
    model = ActiveModel(dictionary, y)
    d = model.dictionary
    path = SelectionPath()
    cap = min(d.n, d.m)
    floor = _floor(model)
    while len(model) < cap:
        if stop.kind == "sparsity" and len(model) >= stop.value:
            break
        if stop.kind == "residual" and model.residual_norm <= stop.value:
            break
        dec = model.decreases()
        if rule == "omp":
            scores = np.abs(model.correlations)
            scores[~np.isfinite(dec)] = -np.inf
        else:
            scores = dec
        best = int(np.argmax(scores))
        if not np.isfinite(scores[best]) or dec[best] <= floor:
            break
        if stop.kind == "improvement" and dec[best] <= stop.value**2:
            break
        if _try_add(model, scores, path) is None:
            break
    return _finish(path, model)


def forward_regression(dictionary, y, stop: StopRule) -> SelectionPath:
    """Forward Regression: add ``argmin_{i not in A} ||r_{A+i}||``.

    The minimizer is found as the maximizer of the residual decrease
    ``<phi_i, r_A>^2 / ||phi_i||^2_{R_A}``, which needs no extra solves.
    """
    return _forward(dictionary, y, stop, "fr")


def omp(dictionary, y, stop: StopRule) -> SelectionPath:
    """Orthogonal Matching Pursuit: add ``argmax_i |<phi_i, r_A>|``."""
    return _forward(dictionary, y, stop, "omp")


def _argmin_lowest(values: np.ndarray, indices) -> int:
    """Position of the smallest value, ties going to the lowest column index."""
    return int(np.lexsort((np.asarray(indices), values))[0])


def _remove_best(model: ActiveModel, path: SelectionPath, threshold: Optional[float]) -> bool:
    inc = model.increases()
    # round-off level increases are exact ties
    inc = np.where(inc <= _floor(model), 0.0, inc)
    j = _argmin_lowest(inc, model.active)
    if threshold is not None and inc[j] > threshold:
        return False
    i = model.active[j]
    model.remove(i)
    path.record("remove", i, model.residual_norm)
    return True


def backward_regression(dictionary, y, stop: StopRule, start: Optional[Iterable[int]] = None) -> SelectionPath:
    """Backward Regression: remove ``argmin_{i in A} ||r_{A-i}||``.

    Starts from every column (or from ``start``, which must index linearly
    independent columns) and removes one column at a time until ``stop``
    says otherwise.

    Raises
    ------
    NotDetermined
        If no ``start`` is given and the dictionary has more columns than rows.
    """
    d = as_dictionary(dictionary)
    if start is None:
        if d.m > d.n:
            raise NotDetermined(f"backward regression needs m <= n, got {d.n}x{d.m}")
        start = range(d.m)
    model = ActiveModel(d, y, start)
    path = SelectionPath()
    floor = _floor(model)
    while model.active:
        if stop.kind == "sparsity":
            if len(model) <= stop.value:
                break
            _remove_best(model, path, None)
        elif stop.kind == "improvement":
            if not _remove_best(model, path, max(stop.value**2, floor)):
                break
        else:
            inc = model.increases()
            if model.residual_norm**2 + inc.min() > stop.value**2:
                break
            _remove_best(model, path, None)
    return _finish(path, model)


def _forward_phase(model: ActiveModel, threshold: float, path: SelectionPath) -> int:
    cap = min(model.dictionary.n, model.dictionary.m)
    added = 0
    while len(model) < cap:
        dec = model.decreases()
        if not dec.max() > threshold:
            break
        if _try_add(model, dec, path) is None:
            break
        added += 1
    return added


def _backward_phase(model: ActiveModel, threshold: float, path: SelectionPath) -> int:
    removed = 0
    while model.active and _remove_best(model, path, threshold):
        removed += 1
    return removed


def rmp0(dictionary, y, delta: float, iterate_outer: bool = False, max_outer: int = 100) -> SelectionPath:
    """Noiseless-limit Relevance Matching Pursuit.

    A forward phase adds the column with the largest residual decrease while
    that decrease exceeds ``delta**2``; a backward phase then removes the
    column with the smallest residual increase while that increase is at
    most ``delta**2``.  With ``iterate_outer`` the two phases repeat until
    the support no longer changes (at most ``max_outer`` passes).
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    model = ActiveModel(dictionary, y)
    path = SelectionPath()
    threshold = max(delta**2, _floor(model))
    passes = max_outer if iterate_outer else 1
    previous = None
    outer = 0
    path.converged = not iterate_outer
    for outer in range(1, passes + 1):
        _forward_phase(model, threshold, path)
        _backward_phase(model, threshold, path)
        support = frozenset(model.active)
        if support == previous:
            path.converged = True
            break
        previous = support
    path.outer_iterations = outer
    return _finish(path, model)


def foba(dictionary, y, delta: float, nu: float = 0.5, max_steps: Optional[int] = None) -> SelectionPath:
    """Adaptive forward-backward greedy selection (FoBa).

    Each forward step adds the best column if its residual decrease exceeds
    ``delta**2``; afterwards columns are removed while the smallest residual
    increase is at most ``nu`` times the gain of that forward step.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    model = ActiveModel(dictionary, y)
    d = model.dictionary
    path = SelectionPath()
    threshold = max(delta**2, _floor(model))
    cap = min(d.n, d.m)
    max_steps = 10 * d.m if max_steps is None else max_steps
    path.converged = False
    while len(path.steps) < max_steps:
        if len(model) >= cap:
            path.converged = True
            break
        dec = model.decreases()
        gain = dec.max()
        if not gain > threshold:
            path.converged = True
            break
        if _try_add(model, dec, path) is None:
            path.converged = True
            break
        while len(model) > 1 and len(path.steps) < max_steps:
            if not _remove_best(model, path, nu * gain):
                break
    return _finish(path, model)
