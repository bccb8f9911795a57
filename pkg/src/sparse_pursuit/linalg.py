"""
Dense linear algebra for incremental least squares.

The central object is :class:`ActiveModel`, which keeps a thin QR
factorization ``Phi_A = Q R`` of the active columns together with the
least-squares residual and the projection of *every* dictionary column onto
the orthogonal complement of ``span(Phi_A)``.  Keeping the projected
dictionary around makes the stepwise selection scores (residual decrease for
inactive columns, residual increase for active ones) cheap vectorized
expressions instead of one solve per candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DuplicateIndex, InSpan, NotActive, RankDeficient

__all__ = [
    "Dictionary",
    "as_dictionary",
    "ActiveModel",
    "ls_solve",
    "add_column",
    "remove_column",
    "residual_decrease",
    "residual_increase",
    "energetic_norm",
    "min_singular_value",
]

NORM_ATOL = 1e-12
RANK_RTOL = 1e-10
SPAN_ATOL = 1e-10
MAX_DOWNDATES = 32
DRIFT_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An immutable ``n x m`` design matrix.

    Parameters
    ----------
    data : ndarray, shape (n, m)
        Column ``i`` is the feature (atom) ``phi_i``.
    normalized : bool
        Whether every column has unit Euclidean norm.  Verified on
        construction.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=float, order="F")
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"dictionary must be a non-empty 2-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("dictionary entries must be finite")
        if self.normalized:
            norms = np.linalg.norm(data, axis=0)
            if np.max(np.abs(norms - 1.0)) > NORM_ATOL:
                raise ValueError("columns are not unit norm")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, a, normalize: bool = True) -> "Dictionary":
        """Wrap ``a``, scaling every column to unit norm when ``normalize``."""
        a = np.asarray(a, dtype=float)
        if normalize:
            norms = np.linalg.norm(a, axis=0)
            if np.any(norms == 0):
                raise ValueError("cannot normalize a zero column")
            a = a / norms
            # one more pass pulls norms to within a couple of ulps of 1
            a = a / np.linalg.norm(a, axis=0)
        return cls(a, normalized=normalize)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @cached_property
    def gram(self) -> np.ndarray:
        """``Phi^T Phi``, computed once and shared by every solver."""
        g = self.data.T @ self.data
        g.setflags(write=False)
        return g

    def columns(self, indices: Sequence[int]) -> np.ndarray:
        return self.data[:, list(indices)]


def as_dictionary(obj) -> Dictionary:
    """Accept a :class:`Dictionary` or an array-like (used as is)."""
    if isinstance(obj, Dictionary):
        return obj
    a = np.asarray(obj, dtype=float)
    unit = a.ndim == 2 and np.all(np.abs(np.linalg.norm(a, axis=0) - 1.0) <= NORM_ATOL)
    return Dictionary(a, normalized=bool(unit))


def _check_rank(diag: np.ndarray) -> None:
    d = np.abs(diag)
    if d.size and d.min() < RANK_RTOL * d.max():
        raise RankDeficient(
            f"triangular factor is singular to working precision "
            f"(min diag {d.min():.3e}, max diag {d.max():.3e})"
        )


def ls_solve(dictionary, indices: Sequence[int], y):
    """Least-squares fit of ``y`` on the columns ``indices``, from scratch.

    Returns
    -------
    coeffs : ndarray, shape (len(indices),)
    residual : ndarray, shape (n,)
    """
    d = as_dictionary(dictionary)
    y = np.asarray(y, dtype=float)
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise DuplicateIndex(f"indices contain duplicates: {indices}")
    if not indices:
        return np.zeros(0), y.copy()
    sub = d.columns(indices)
    if len(indices) > d.n:
        raise RankDeficient(f"{len(indices)} columns cannot be independent in R^{d.n}")
    q, r = np.linalg.qr(sub)
    _check_rank(np.diag(r))
    coeffs = solve_triangular(r, q.T @ y, check_finite=False)
    return coeffs, y - sub @ coeffs


class ActiveModel:
    """Least-squares model over an ordered active set, updated in place.

    Maintains ``Phi_A = Q R`` (``Q`` with orthonormal columns, ``R`` upper
    triangular), ``Q^T y``, the residual ``r_A`` and the projected dictionary
    ``(I - Q Q^T) Phi``.  Columns are appended with a reorthogonalized
    Gram-Schmidt step and removed with Givens rotations; a fresh Householder
    factorization replaces the running one after ``MAX_DOWNDATES`` removals
    or when the diagonal of ``R`` drifts.

    Parameters
    ----------
    dictionary : Dictionary or array_like
    y : array_like, shape (n,)
    active : iterable of int, optional
        Columns to add (in order) on construction.
    """

    def __init__(self, dictionary, y, active: Iterable[int] = ()):
        self.dictionary = as_dictionary(dictionary)
        y = np.array(y, dtype=float)
        if y.shape != (self.dictionary.n,):
            raise ValueError(f"target has shape {y.shape}, expected ({self.dictionary.n},)")
        self.y = y
        self.y_norm = float(np.linalg.norm(y))
        self._phi_t_y = self.dictionary.data.T @ y
        self._reset()
        for i in active:
            self.add(i)

    def _reset(self):
        n, m = self.dictionary.shape
        self.active: list[int] = []
        self._Q = np.zeros((n, 0))
        self._R = np.zeros((0, 0))
        self._z = np.zeros(0)
        self.residual = self.y.copy()
        self._proj = np.array(self.dictionary.data, order="F")
        self._downdates = 0
        self._invalidate()

    def _invalidate(self):
        self._energy = None
        self._corr = None
        self._rinv = None

    # -- read-only views ---------------------------------------------------

    def __len__(self):
        return len(self.active)

    def __contains__(self, i):
        return i in self.active

    @property
    def factor(self) -> np.ndarray:
        """Upper-triangular ``R`` with ``R^T R = Phi_A^T Phi_A``."""
        return self._R

    @property
    def coeffs(self) -> np.ndarray:
        """Least-squares coefficients, ordered like :attr:`active`."""
        if not self.active:
            return np.zeros(0)
        return solve_triangular(self._R, self._z, check_finite=False)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def full_coeffs(self) -> np.ndarray:
        """Coefficients scattered into a length-``m`` vector."""
        x = np.zeros(self.dictionary.m)
        x[self.active] = self.coeffs
        return x

    @property
    def energy(self) -> np.ndarray:
        """Squared energetic norms ``phi_i^T R_A phi_i`` of all columns."""
        if self._energy is None:
            self._energy = np.einsum("ij,ij->j", self._proj, self._proj)
        return self._energy

    @property
    def correlations(self) -> np.ndarray:
        """``Phi^T r_A``."""
        if self._corr is None:
            self._corr = self.dictionary.data.T @ self.residual
        return self._corr

    def _r_inverse(self) -> np.ndarray:
        if self._rinv is None:
            k = len(self.active)
            self._rinv = solve_triangular(self._R, np.eye(k), check_finite=False)
        return self._rinv

    # -- scores --------------------------------------------------------------

    def decreases(self) -> np.ndarray:
        """``||r_A||^2 - ||r_{A+i}||^2`` for every column.

        Active columns and columns whose energetic norm is below
        ``SPAN_ATOL`` are reported as ``-inf``.
        """
        e = self.energy
        c = self.correlations
        out = np.full(self.dictionary.m, -np.inf)
        ok = e > SPAN_ATOL**2
        ok[self.active] = False
        out[ok] = c[ok] ** 2 / e[ok]
        return out

    def increases(self) -> np.ndarray:
        """``||r_{A-i}||^2 - ||r_A||^2`` for each active column, in active order.

        Uses ``x_i^2 / [(Phi_A^T Phi_A)^{-1}]_{ii}``, i.e. the squared
        least-squares coefficient over the squared energetic norm of
        ``phi_i`` with respect to the remaining active columns.
        """
        if not self.active:
            return np.zeros(0)
        rinv = self._r_inverse()
        x = rinv @ self._z
        return x**2 / np.einsum("ij,ij->i", rinv, rinv)

    # -- updates -------------------------------------------------------------

    def add(self, i: int) -> "ActiveModel":
        """Append column ``i``."""
        i = int(i)
        d = self.dictionary
        if not 0 <= i < d.m:
            raise IndexError(f"column {i} out of range for m={d.m}")
        if i in self.active:
            raise DuplicateIndex(f"column {i} is already active")
        if len(self.active) >= d.n:
            raise RankDeficient(f"cannot add column {i}: active set already spans R^{d.n}")
        phi = d.data[:, i]
        Q = self._Q
        h = Q.T @ phi
        v = phi - Q @ h
        h2 = Q.T @ v
        v -= Q @ h2
        h += h2
        rho = float(np.linalg.norm(v))
        scale = max(float(np.linalg.norm(phi)), float(np.abs(np.diag(self._R)).max(initial=0.0)))
        if rho < RANK_RTOL * scale or rho < SPAN_ATOL * float(np.linalg.norm(phi)):
            raise RankDeficient(f"column {i} lies in the span of the active columns")
        q = v / rho
        k = len(self.active)
        R = np.zeros((k + 1, k + 1))
        R[:k, :k] = self._R
        R[:k, k] = h
        R[k, k] = rho
        self._R = R
        self._Q = np.column_stack([Q, q])
        zq = float(q @ self.y)
        self._z = np.append(self._z, zq)
        self.residual -= zq * q
        self._proj -= np.outer(q, q @ self._proj)
        self._proj[:, i] = 0.0
        self.active.append(i)
        self._invalidate()
        return self

    def remove(self, i: int) -> "ActiveModel":
        """Drop column ``i`` from the active set."""
        i = int(i)
        if i not in self.active:
            raise NotActive(f"column {i} is not active")
        j = self.active.index(i)
        k = len(self.active)
        if k == 1:
            self._reset()
            return self
        R = np.delete(self._R, j, axis=1)
        Q = self._Q.copy()
        z = self._z.copy()
        for p in range(j, k - 1):
            a, b = R[p, p], R[p + 1, p]
            h = np.hypot(a, b)
            if h == 0.0:
                continue
            c, s = a / h, b / h
            rows = R[p : p + 2, p:]
            R[p : p + 2, p:] = np.array([[c, s], [-s, c]]) @ rows
            R[p + 1, p] = 0.0
            Q[:, p : p + 2] = Q[:, p : p + 2] @ np.array([[c, -s], [s, c]])
            z[p : p + 2] = np.array([c * z[p] + s * z[p + 1], -s * z[p] + c * z[p + 1]])
        q_out, z_out = Q[:, k - 1], z[k - 1]
        self._R = R[: k - 1]
        self._Q = Q[:, : k - 1]
        self._z = z[: k - 1]
        self.residual += z_out * q_out
        self._proj += np.outer(q_out, q_out @ self.dictionary.data)
        self.active.pop(j)
        self._proj[:, self.active] = 0.0
        self._downdates += 1
        self._invalidate()
        diag = np.abs(np.diag(self._R))
        if self._downdates > MAX_DOWNDATES or diag.min() < DRIFT_RTOL * diag.max():
            self.refactor()
        return self

    def refactor(self) -> "ActiveModel":
        """Recompute every maintained quantity from a fresh QR factorization."""
        d = self.dictionary
        if not self.active:
            self._reset()
            return self
        sub = d.columns(self.active)
        Q, R = np.linalg.qr(sub)
        _check_rank(np.diag(R))
        self._Q, self._R = Q, R
        self._z = Q.T @ self.y
        self.residual = self.y - Q @ self._z
        self._proj = np.asfortranarray(d.data - Q @ (Q.T @ d.data))
        self._proj[:, self.active] = 0.0
        self._downdates = 0
        self._invalidate()
        return self

    def copy(self) -> "ActiveModel":
        new = object.__new__(ActiveModel)
        new.__dict__.update(self.__dict__)
        new.active = list(self.active)
        new.residual = self.residual.copy()
        new._proj = self._proj.copy(order="F")
        return new


def add_column(model: ActiveModel, i: int) -> ActiveModel:
    return model.add(i)


def remove_column(model: ActiveModel, i: int) -> ActiveModel:
    return model.remove(i)


def residual_decrease(model: ActiveModel, i: int) -> float:
    """Drop in squared residual norm if inactive column ``i`` were added."""
    if i in model.active:
        raise DuplicateIndex(f"column {i} is already active")
    e = float(model.energy[i])
    if e <= SPAN_ATOL**2:
        raise InSpan(f"column {i} has energetic norm {np.sqrt(max(e, 0.0)):.3e}")
    return float(model.correlations[i] ** 2 / e)


def residual_increase(model: ActiveModel, i: int) -> float:
    """Rise in squared residual norm if active column ``i`` were removed."""
    if i not in model.active:
        raise NotActive(f"column {i} is not active")
    return float(model.increases()[model.active.index(i)])


def energetic_norm(dictionary, A: Sequence[int], v) -> float:
    """``sqrt(v^T (I - Phi_A Phi_A^+) v)``, computed from a fresh factorization."""
    d = as_dictionary(dictionary)
    v = np.asarray(v, dtype=float)
    A = list(A)
    if not A:
        return float(np.linalg.norm(v))
    Q, R = np.linalg.qr(d.columns(A))
    _check_rank(np.diag(R))
    w = v - Q @ (Q.T @ v)
    w -= Q @ (Q.T @ w)
    return float(np.sqrt(max(float(w @ w), 0.0)))


def min_singular_value(matrix) -> float:
    a = matrix.data if isinstance(matrix, Dictionary) else np.asarray(matrix, dtype=float)
    return float(np.linalg.svd(a, compute_uv=False)[-1])
