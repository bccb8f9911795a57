"""
Sparse Bayesian Learning by coordinate ascent on the marginal likelihood.

Model: ``y = Phi x + noise`` with ``noise ~ N(0, sigma^2 I)`` and an
independent prior ``x_i ~ N(0, gamma_i)``.  The marginal covariance is
``C = sigma^2 I + Phi diag(gamma) Phi^T``.

Numerics
--------
Internally everything is kept in *scaled* form, multiplied through by
``sigma^2``, so that the small-noise regime does not cancel catastrophically:

* ``M = sigma^2 Gamma_A^{-1} + Phi_A^T Phi_A`` and its inverse ``P = M^{-1}``
  (so the posterior covariance is ``Sigma = sigma^2 P``);
* ``mu = P Phi_A^T y`` (the posterior mean, unscaled);
* ``S_i = phi_i^T R phi_i`` and ``Q_i = phi_i^T R y`` with
  ``R = sigma^2 C^{-1} = I - Phi_A P Phi_A^T``.

The leave-one-out quality and sparsity factors follow as ``q_i = Q_i /
sigma^2``, ``s_i = S_i / sigma^2`` for inactive columns and, for an active
column at position ``j``, ``s_i = (1/P_jj - sigma^2/gamma_i) / sigma^2`` and
``q_i = (mu_j / P_jj) / sigma^2``.

Log-likelihood convention: :func:`log_marginal_likelihood` returns the
conventional ``-1/2 (y^T C^{-1} y + log|C| + n log 2 pi)``, which makes
``L(gamma) = L(gamma_{-i}) + l(gamma_i)`` with
``l(g) = 1/2 (q^2 g / (1 + g s) - log(1 + g s))`` exact.
"""

from __future__ import annotations

from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NumericalFailure
from .linalg import as_dictionary
from .stepwise import SelectionPath, _argmin_lowest

__all__ = [
    "SblState",
    "log_marginal_likelihood",
    "optimal_gamma",
    "delta_add",
    "delta_delete",
    "delta_update",
    "refresh_factors",
    "rmp_sigma",
    "fsbl",
]

REFRESH_EVERY = 50
_TINY = 1e-300


def _woodbury_terms(d, gamma, sigma2, y):
    gamma = np.asarray(gamma, dtype=float)
    A = np.flatnonzero(gamma > 0)
    yy = float(y @ y)
    if A.size == 0:
        return yy / sigma2, d.n * np.log(sigma2)
    root = np.sqrt(gamma[A])
    cf = _scaled_factor(d.gram[np.ix_(A, A)], root, sigma2)
    b = root * (d.data[:, A].T @ y)
    quad = (yy - float(b @ cho_solve(cf, b, check_finite=False))) / sigma2
    logdet_k = 2.0 * np.sum(np.log(np.abs(np.diag(cf[0]))))
    logdet = (d.n - A.size) * np.log(sigma2) + logdet_k
    return quad, logdet


def _scaled_factor(G, root, sigma2):
    """Cholesky factor of ``sigma^2 I + D G D`` with ``D = diag(root)``.

    Symmetric scaling by ``Gamma^(1/2)`` keeps the smallest eigenvalue at
    least ``sigma^2`` even when the active columns are linearly dependent.
    """
    K = root[:, None] * G * root[None, :]
    K[np.diag_indices_from(K)] += sigma2
    try:
        return cho_factor(K, lower=False, check_finite=False)
    except LinAlgError as exc:
        raise NumericalFailure(f"posterior precision lost definiteness: {exc}") from exc


def log_marginal_likelihood(dictionary, gamma, sigma2: float, y) -> float:
    """Type-II log likelihood ``-1/2 (y^T C^-1 y + log|C| + n log 2 pi)``.

    Evaluated through the Woodbury identity on the active columns only.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("prior variances must be non-negative")
    d = as_dictionary(dictionary)
    y = np.asarray(y, dtype=float)
    quad, logdet = _woodbury_terms(d, gamma, sigma2, y)
    return -0.5 * (quad + logdet + d.n * np.log(2 * np.pi))


def optimal_gamma(q: float, s: float) -> float:
    """Maximizer of ``l(gamma)``: ``(q^2 - s) / s^2`` if ``q^2 > s``, else 0."""
    q2 = q * q
    return (q2 - s) / (s * s) if q2 > s else 0.0


def _l(g, q, s):
    return 0.5 * (q * q * g / (1.0 + g * s) - np.log1p(g * s))


def _l_change(g0, g1, q, s):
    # l(g1) - l(g0) without differencing two large numbers
    num = q * q * (g1 - g0) / ((1.0 + g1 * s) * (1.0 + g0 * s))
    return 0.5 * (num - np.log1p((g1 - g0) * s / (1.0 + g0 * s)))


def delta_add(q: float, s: float) -> float:
    """Likelihood gain of moving an inactive ``gamma_i`` from 0 to its optimum."""
    q2 = q * q
    if not q2 > s:
        return 0.0
    t = q2 / s - 1.0
    return 0.5 * (t - np.log1p(t))


def delta_delete(q: float, s: float, gamma: float) -> float:
    """Likelihood change of setting an active ``gamma_i`` to zero."""
    return -float(_l(gamma, q, s))


def delta_update(q: float, s: float, gamma_old: float) -> float:
    """Likelihood change of moving an active ``gamma_i`` to its optimum."""
    return float(_l_change(gamma_old, optimal_gamma(q, s), q, s))


class SblState:
    """Posterior and per-column factors for a given ``gamma``, kept current
    under single-coordinate changes via rank-one updates.

    Parameters
    ----------
    dictionary : Dictionary or array_like
    y : array_like, shape (n,)
    sigma2 : float
        Noise variance, strictly positive.
    gamma : array_like, optional
        Initial prior variances (default all zero).
    """

    def __init__(self, dictionary, y, sigma2: float, gamma=None):
        if not sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        self.dictionary = d = as_dictionary(dictionary)
        self.y = np.array(y, dtype=float)
        self.sigma2 = float(sigma2)
        self._b = d.data.T @ self.y
        self._yy = float(self.y @ self.y)
        self.gamma = np.zeros(d.m) if gamma is None else np.array(gamma, dtype=float)
        if self.gamma.shape != (d.m,) or np.any(self.gamma < 0):
            raise ValueError("gamma must be a non-negative vector of length m")
        self.moves = 0
        self.recompute()

    # -- dense path ----------------------------------------------------------

    def recompute(self) -> "SblState":
        """Rebuild ``P``, ``mu``, ``S`` and ``Q`` from scratch."""
        d = self.dictionary
        self.active = [int(i) for i in np.flatnonzero(self.gamma > 0)]
        A = self.active
        diag = np.diag(d.gram).copy()
        if not A:
            self._P = np.zeros((0, 0))
            self.mu = np.zeros(0)
            self._S = diag
            self._Q = self._b.copy()
            return self
        root = np.sqrt(self.gamma[A])
        cf = _scaled_factor(d.gram[np.ix_(A, A)], root, self.sigma2)
        # P = D K^-1 D
        self._P = root[:, None] * cho_solve(cf, np.diag(root), check_finite=False)
        self._P = 0.5 * (self._P + self._P.T)
        self.mu = self._P @ self._b[A]
        B = d.gram[:, A]
        self._S = diag - np.einsum("ij,ij->i", B @ self._P, B)
        self._Q = self._b - B @ self.mu
        return self

    # -- public views --------------------------------------------------------

    @property
    def Sigma(self) -> np.ndarray:
        """Posterior covariance of ``x_A``."""
        return self.sigma2 * self._P

    def scaled_factors(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(sigma^2 q, sigma^2 s)`` for every column."""
        qs = self._Q.copy()
        ss = self._S.copy()
        if self.active:
            A = self.active
            pd = np.diag(self._P)
            ss[A] = 1.0 / pd - self.sigma2 / self.gamma[A]
            qs[A] = self.mu / pd
        return qs, ss

    @property
    def q(self) -> np.ndarray:
        return self.scaled_factors()[0] / self.sigma2

    @property
    def s(self) -> np.ndarray:
        return self.scaled_factors()[1] / self.sigma2

    def correlation(self) -> np.ndarray:
        """``|<phi~_i, r_{A\\i,sigma}>|`` for every column.

        The quantity the acquisition and deletion rules compare with
        ``sigma``; it exceeds ``sigma`` exactly when ``q_i^2 > s_i``.
        """
        qs, ss = self.scaled_factors()
        return np.abs(qs) / np.sqrt(np.maximum(ss, _TINY))

    def relevance(self) -> np.ndarray:
        """``q_i^2 / s_i``; a column belongs in the model iff this exceeds 1."""
        qs, ss = self.scaled_factors()
        with np.errstate(over="ignore"):
            return qs * qs / (self.sigma2 * np.maximum(ss, _TINY))

    def residual(self) -> np.ndarray:
        """``r_{A,sigma} = y - Phi_A mu``."""
        if not self.active:
            return self.y.copy()
        return self.y - self.dictionary.data[:, self.active] @ self.mu

    def residual_projector(self) -> np.ndarray:
        """Dense ``R_{A,sigma} = sigma^2 C^{-1} = I - Phi_A P Phi_A^T`` (n x n)."""
        n = self.dictionary.n
        if not self.active:
            return np.eye(n)
        F = self.dictionary.data[:, self.active]
        return np.eye(n) - F @ self._P @ F.T

    def residual_norm(self) -> float:
        if not self.active:
            return float(np.sqrt(self._yy))
        A = self.active
        b = self._b[A]
        G = self.dictionary.gram[np.ix_(A, A)]
        val = self._yy - 2 * float(self.mu @ b) + float(self.mu @ G @ self.mu)
        return float(np.sqrt(max(val, 0.0)))

    def log_likelihood(self) -> float:
        return log_marginal_likelihood(self.dictionary, self.gamma, self.sigma2, self.y)

    def full_mean(self) -> np.ndarray:
        x = np.zeros(self.dictionary.m)
        x[self.active] = self.mu
        return x

    # -- rank-one moves ------------------------------------------------------

    def set_gamma(self, i: int, value: float) -> "SblState":
        """Change one prior variance and update every factor in ``O(k^2 + k m)``."""
        i = int(i)
        value = float(value)
        if value < 0:
            raise ValueError("prior variance must be non-negative")
        old = self.gamma[i]
        if value == old:
            return self
        G = self.dictionary.gram
        s2 = self.sigma2
        if old == 0.0:
            # addition
            A = self.active
            pii = 1.0 / (s2 / value + self._S[i])
            mui = pii * self._Q[i]
            if A:
                v = self._P @ G[A, i]
                z = G[:, i] - G[:, A] @ v
                k = len(A)
                P = np.empty((k + 1, k + 1))
                P[:k, :k] = self._P + pii * np.outer(v, v)
                P[:k, k] = P[k, :k] = -pii * v
                P[k, k] = pii
                self.mu = np.append(self.mu - mui * v, mui)
            else:
                z = G[:, i].copy()
                P = np.array([[pii]])
                self.mu = np.array([mui])
            self._P = P
            self._S = self._S - pii * z * z
            self._Q = self._Q - mui * z
            self.active = A + [i]
        else:
            j = self.active.index(i)
            pj = self._P[:, j].copy()
            pjj = pj[j]
            if value == 0.0:
                kappa = 1.0 / pjj
            else:
                dm = s2 / value - s2 / old
                kappa = dm / (1.0 + dm * pjj)
            w = G[:, self.active] @ pj
            muj = self.mu[j]
            self._P = self._P - kappa * np.outer(pj, pj)
            self.mu = self.mu - kappa * muj * pj
            self._S = self._S + kappa * w * w
            self._Q = self._Q + kappa * muj * w
            if value == 0.0:
                keep = [t for t in range(len(self.active)) if t != j]
                self._P = self._P[np.ix_(keep, keep)]
                self.mu = self.mu[keep]
                self.active = [self.active[t] for t in keep]
        self.gamma[i] = value
        self.moves += 1
        if self.moves % REFRESH_EVERY == 0:
            self.recompute()
        elif self.active and np.min(np.diag(self._P)) <= 0:
            self.recompute()
        return self

    def copy(self) -> "SblState":
        new = object.__new__(SblState)
        new.__dict__.update(self.__dict__)
        new.gamma = self.gamma.copy()
        new.active = list(self.active)
        return new


def refresh_factors(state: SblState, changes: Iterable[Tuple[int, float]] = ()) -> SblState:
    """Apply ``(index, new_gamma)`` changes one rank-one move at a time.

    With no changes the state is returned untouched.
    """
    for i, g in changes:
        state.set_gamma(i, g)
    return state


def _defaults(d, delta_l, max_moves):
    delta_l = 1e-6 * d.n if delta_l is None else float(delta_l)
    max_moves = 10 * d.m if max_moves is None else int(max_moves)
    return delta_l, max_moves


def _finish(path: SelectionPath, state: SblState) -> SelectionPath:
    path.final_support = tuple(sorted(state.active))
    path.iterations = len(path.steps)
    path.coeffs = state.full_mean()
    path.residual_norm = state.residual_norm()
    return path


def rmp_sigma(
    dictionary,
    y,
    sigma: float,
    delta_l: Optional[float] = None,
    max_outer: int = 100,
    max_moves: Optional[int] = None,
    init_gamma=None,
) -> Tuple[np.ndarray, SelectionPath]:
    """Relevance Matching Pursuit with noise standard deviation ``sigma``.

    Each outer pass first adds, one at a time, the inactive column with the
    largest ``|<phi~_i, r_{A,sigma}>|`` while that value exceeds ``sigma``.
    It then repeatedly deletes the active column with the smallest
    leave-one-out value if that is at most ``sigma``, or otherwise applies
    the prior-variance update with the largest likelihood gain if the gain
    exceeds ``delta_l``.  The run has converged when a whole pass makes no
    move.

    Returns
    -------
    gamma : ndarray, shape (m,)
    path : SelectionPath
        Steps are ``add``, ``remove`` and ``update``; ``converged`` is False
        if ``max_outer`` or ``max_moves`` ended the run.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d = as_dictionary(dictionary)
    delta_l, max_moves = _defaults(d, delta_l, max_moves)
    state = SblState(d, y, sigma * sigma, init_gamma)
    path = SelectionPath(converged=False)
    outer = 0
    moves = 0
    for outer in range(1, max_outer + 1):
        moved = False
        while moves < max_moves:
            rel = state.relevance()
            rel[state.active] = -np.inf
            i = int(np.argmax(rel))
            if not rel[i] > 1.0:
                break
            qs, ss = state.scaled_factors()
            state.set_gamma(i, optimal_gamma(qs[i] / state.sigma2, ss[i] / state.sigma2))
            path.record("add", i, state.residual_norm())
            moves += 1
            moved = True
        while moves < max_moves and state.active:
            A = state.active
            rel = state.relevance()[A]
            j = _argmin_lowest(rel, A)
            if rel[j] <= 1.0:
                i = A[j]
                state.set_gamma(i, 0.0)
                path.record("remove", i, state.residual_norm())
            else:
                qs, ss = state.scaled_factors()
                q = qs[A] / state.sigma2
                s = ss[A] / state.sigma2
                g = state.gamma[A]
                with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                    gain = _l_change(g, (q * q - s) / (s * s), q, s)
                gain = np.where(np.isfinite(gain), gain, -np.inf)
                j = int(np.argmax(gain))
                if not gain[j] > delta_l:
                    break
                i = A[j]
                state.set_gamma(i, optimal_gamma(q[j], s[j]))
                path.record("update", i, state.residual_norm())
            moves += 1
            moved = True
        if not moved:
            path.converged = True
            break
        if moves >= max_moves:
            break
    path.outer_iterations = outer
    return state.gamma.copy(), _finish(path, state)


def fsbl(
    dictionary,
    y,
    sigma: float,
    delta_l: Optional[float] = None,
    max_moves: Optional[int] = None,
    init_gamma=None,
) -> Tuple[np.ndarray, SelectionPath]:
    """Steepest coordinate ascent: apply the single add, delete or update
    with the largest likelihood gain until no gain exceeds ``delta_l``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d = as_dictionary(dictionary)
    delta_l, max_moves = _defaults(d, delta_l, max_moves)
    state = SblState(d, y, sigma * sigma, init_gamma)
    path = SelectionPath(converged=False)
    while len(path.steps) < max_moves:
        qs, ss = state.scaled_factors()
        q = qs / state.sigma2
        s = np.maximum(ss, _TINY) / state.sigma2
        g = state.gamma
        q2 = q * q
        target = np.where(q2 > s, (q2 - s) / (s * s), 0.0)
        gain = _l_change(g, target, q, s)
        # columns that stay at zero gain nothing
        gain[(g == 0) & (target == 0)] = 0.0
        i = int(np.argmax(gain))
        if not gain[i] > delta_l:
            path.converged = True
            break
        action = "add" if g[i] == 0 else ("remove" if target[i] == 0 else "update")
        state.set_gamma(i, target[i])
        path.record(action, i, state.residual_norm())
    path.outer_iterations = 1
    return state.gamma.copy(), _finish(path, state)
