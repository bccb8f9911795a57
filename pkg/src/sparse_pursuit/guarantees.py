"""
Computable recovery guarantees for greedy support selection.

Every bound here is a closed-form expression in a few dictionary statistics
(coherence, Babel function, smallest singular value) and the smallest
non-zero magnitude ``x_min`` of the sparse generator.  The noise bounds return
the largest ``||eps||_2`` for which recovery is guaranteed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_ndtr

from .errors import BadArity, NotNormalized, RankDeficient
from .linalg import NORM_ATOL, RANK_RTOL, as_dictionary, ls_solve, min_singular_value

__all__ = [
    "GuaranteeReport",
    "coherence",
    "babel",
    "erc",
    "forward_noise_bound",
    "forward_success_probability",
    "baseline_success_probability",
    "backward_noise_bound",
    "backward_superset_bound",
    "subset_selection_certificate",
    "guarantee_report",
]


def _unit_gram(dictionary) -> np.ndarray:
    d = as_dictionary(dictionary)
    if not d.normalized:
        norms = np.linalg.norm(d.data, axis=0)
        if np.max(np.abs(norms - 1.0)) > NORM_ATOL:
            raise NotNormalized("coherence-type quantities need unit-norm columns")
    return d.gram


def coherence(dictionary) -> float:
    """Largest absolute inner product between two distinct columns."""
    g = np.abs(_unit_gram(dictionary)).copy()
    if g.shape[0] < 2:
        return 0.0
    np.fill_diagonal(g, 0.0)
    return float(g.max())


def babel(dictionary, k: int) -> float:
    """Babel function ``mu_1(k)``.

    For a fixed reference column the inner maximization over ``k``-sets is
    attained by its ``k`` largest off-diagonal magnitudes, so the value is
    a per-row top-``k`` sum maximized over rows.
    """
    g = np.abs(_unit_gram(dictionary)).copy()
    m = g.shape[0]
    if not 1 <= k <= m - 1:
        raise BadArity(f"Babel function needs 1 <= k <= m-1 = {m - 1}, got k={k}")
    np.fill_diagonal(g, -np.inf)
    top = -np.partition(-g, k - 1, axis=1)[:, :k]
    return float(top.sum(axis=1).max())


def erc(dictionary, support: Sequence[int]) -> float:
    """``max_{j not in S} ||Phi_S^+ phi_j||_1`` (0 when every column is in S)."""
    d = as_dictionary(dictionary)
    S = list(support)
    rest = [j for j in range(d.m) if j not in set(S)]
    if not rest:
        return 0.0
    if not S:
        raise BadArity("support must be non-empty")
    Q, R = np.linalg.qr(d.columns(S))
    diag = np.abs(np.diag(R))
    if diag.min() < RANK_RTOL * diag.max() or len(S) > d.n:
        raise RankDeficient("Phi_S does not have full column rank")
    coef = np.linalg.solve(R, Q.T @ d.columns(rest))
    return float(np.abs(coef).sum(axis=0).max())


def forward_noise_bound(mu1_k: float, x_min: float) -> float:
    """Largest ``||eps||`` for which OMP and Forward Regression are guaranteed
    to recover the support in ``k`` steps; 0 when ``mu1_k >= 1/2``."""
    if not x_min > 0:
        raise BadArity("x_min must be positive")
    if not mu1_k < 0.5:
        return 0.0
    return (1.0 - 2.0 * mu1_k) / math.sqrt(2.0 * (1.0 + mu1_k)) * x_min


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def forward_success_probability(
    mu1_k: float, mu1_2k: float, m: int, k: int, delta: float
) -> Tuple[float, Optional[float]]:
    """Lower bounds on the probability that OMP / Forward Regression recover
    the support under Gaussian noise.

    ``delta`` is ``(1/2 - mu1_k) * x_min / sigma``.  Returns
    ``(bound1, bound2)``; ``bound2`` is ``None`` unless ``mu1_2k < 1/2``.
    Both are clamped to ``[0, 1]``.
    """
    if not (mu1_k < 1 and mu1_2k < 1 and delta > 0 and k >= 1 and m >= 1):
        raise BadArity(f"need mu1(k) < 1, mu1(2k) < 1, delta > 0; got {mu1_k}, {mu1_2k}, {delta}")
    d = math.ceil(m / k)
    kappa = (1.0 + mu1_2k) / (1.0 - mu1_k)
    # 1 - erf(t) = erfc(t) = 2 Phi(-t sqrt 2); log space avoids under/overflow
    log_erfc = math.log(2.0) + float(log_ndtr(-delta / math.sqrt(2.0 * kappa) * math.sqrt(2.0)))
    log_fail1 = math.log(d) + 0.5 * k * math.log((1.0 + kappa) / (1.0 - mu1_2k)) + k * log_erfc
    bound1 = _clamp01(1.0 - math.exp(min(log_fail1, 700.0)))
    bound2 = None
    if mu1_2k < 0.5:
        log_fail2 = math.log(d) + k * (math.log(4.0 / (math.sqrt(math.pi) * delta)) - delta**2 / 6.0)
        bound2 = _clamp01(1.0 - math.exp(min(log_fail2, 700.0)))
    return bound1, bound2


def baseline_success_probability(m: int, delta: float) -> float:
    """Earlier coherence-based bound: ``1 - 2 m exp(-delta^2/2) / delta``."""
    if not delta > 0:
        raise BadArity("delta must be positive")
    return max(0.0, 1.0 - 2.0 * m * math.exp(-(delta**2) / 2.0) / delta)


def backward_noise_bound(sigma_min: float, x_min: float) -> float:
    """Largest ``||eps||`` for which Backward Regression recovers the support
    of a determined, full-column-rank system."""
    if not 0 < sigma_min <= 1 + 1e-12:
        raise BadArity(f"sigma_min must lie in (0, 1] for unit-norm columns, got {sigma_min}")
    if not x_min > 0:
        raise BadArity("x_min must be positive")
    sigma_min = min(sigma_min, 1.0)
    return sigma_min / math.sqrt(2.0 * (2.0 - sigma_min**2)) * x_min


def backward_superset_bound(mu1_k: float, x_min: float) -> float:
    """Noise bound for Backward Regression started from a superset of the
    support, in terms of the Babel function."""
    if not 0 <= mu1_k < 1:
        raise BadArity(f"need 0 <= mu1(k) < 1, got {mu1_k}")
    if not x_min > 0:
        raise BadArity("x_min must be positive")
    return math.sqrt((1.0 - mu1_k) / (2.0 * (1.0 + mu1_k))) * x_min


def subset_selection_certificate(dictionary, support: Sequence[int], y) -> Tuple[bool, float]:
    """Check whether ``support`` provably solves the subset selection problem.

    Fits ``y`` on ``support`` by least squares and compares the residual norm
    with :func:`backward_noise_bound` at ``sigma_min(Phi)`` and the smallest
    fitted coefficient magnitude.

    Returns
    -------
    certified : bool
    margin : float
        ``bound - ||r||``; positive iff certified.
    """
    d = as_dictionary(dictionary)
    if d.m > d.n:
        raise RankDeficient("certificate applies to determined systems (m <= n)")
    smin = min_singular_value(d)
    smax = float(np.linalg.norm(d.data, 2))
    if smin <= RANK_RTOL * smax:
        raise RankDeficient("dictionary does not have full column rank")
    coeffs, r = ls_solve(d, list(support), y)
    x_min = float(np.min(np.abs(coeffs))) if coeffs.size else 0.0
    if x_min == 0.0:
        return False, -float(np.linalg.norm(r))
    bound = backward_noise_bound(smin, x_min)
    margin = bound - float(np.linalg.norm(r))
    return margin > 0, margin


@dataclass
class GuaranteeReport:
    """All guarantee quantities for one dictionary and sparsity level."""

    k: int
    x_min: float
    mu: float
    mu1: Dict[int, float]
    erc_value: Optional[float]
    fwd_bound: float
    bwd_bound: Optional[float]
    superset_bound: Optional[float]
    sigma_min: float
    prob_bounds: List[Tuple[float, float, Optional[float], float]] = field(default_factory=list)


def guarantee_report(
    dictionary,
    k: int,
    x_min: float = 1.0,
    support: Optional[Sequence[int]] = None,
    deltas: Sequence[float] = (),
) -> GuaranteeReport:
    """Evaluate every calculator for ``dictionary`` at sparsity ``k``."""
    d = as_dictionary(dictionary)
    if not 1 <= k <= d.m - 1:
        raise BadArity(f"need 1 <= k <= m-1 = {d.m - 1}, got k={k}")
    ks = sorted({1, k, min(2 * k, d.m - 1)})
    mu1 = {j: babel(d, j) for j in ks}
    mu1_k, mu1_2k = mu1[k], mu1[min(2 * k, d.m - 1)]
    smin = min_singular_value(d)
    bwd = backward_noise_bound(smin, x_min) if d.m <= d.n and 0 < smin else None
    sup = backward_superset_bound(mu1_k, x_min) if mu1_k < 1 else None
    probs = []
    for delta in deltas:
        if mu1_k < 1 and mu1_2k < 1:
            b1, b2 = forward_success_probability(mu1_k, mu1_2k, d.m, k, delta)
        else:
            b1, b2 = 0.0, None
        probs.append((float(delta), b1, b2, baseline_success_probability(d.m, delta)))
    return GuaranteeReport(
        k=k,
        x_min=x_min,
        mu=mu1[1],
        mu1=mu1,
        erc_value=erc(d, support) if support is not None else None,
        fwd_bound=forward_noise_bound(mu1_k, x_min),
        bwd_bound=bwd,
        superset_bound=sup,
        sigma_min=smin,
        prob_bounds=probs,
    )

