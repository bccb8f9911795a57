"""Independent reference computations used by the tests.

Everything here is deliberately naive: dense matrices, normal equations,
explicit projectors and exhaustive enumeration.
"""

import itertools

import mpmath as mp
import numpy as np
from scipy.linalg import hadamard

from sparse_pursuit import Dictionary

mp.mp.dps = 50


def random_dictionary(rng, n, m):
    return Dictionary.from_array(rng.standard_normal((n, m)))


def normal_equations(Phi, idx, y):
    idx = list(idx)
    if not idx:
        return np.zeros(0), y.copy()
    A = Phi[:, idx]
    c = np.linalg.solve(A.T @ A, A.T @ y)
    return c, y - A @ c


def residual_sq(Phi, idx, y):
    _, r = normal_equations(Phi, idx, y)
    return float(r @ r)


def projector(Phi, idx):
    """Dense ``I - Phi_A Phi_A^+``."""
    n = Phi.shape[0]
    idx = list(idx)
    if not idx:
        return np.eye(n)
    A = Phi[:, idx]
    return np.eye(n) - A @ np.linalg.pinv(A)


def brute_babel(Phi, k):
    G = np.abs(Phi.T @ Phi)
    m = G.shape[0]
    best = 0.0
    for I in itertools.combinations(range(m), k):
        for i in range(m):
            if i not in I:
                best = max(best, sum(G[i, j] for j in I))
    return best


def brute_coherence(Phi):
    m = Phi.shape[1]
    best = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                best = max(best, abs(float(Phi[:, i] @ Phi[:, j])))
    return best


def pinv_erc(Phi, S):
    rest = [j for j in range(Phi.shape[1]) if j not in S]
    if not rest:
        return 0.0
    U, s, Vt = np.linalg.svd(Phi[:, list(S)], full_matrices=False)
    pinv = Vt.T @ np.diag(1.0 / s) @ U.T
    return max(float(np.abs(pinv @ Phi[:, j]).sum()) for j in rest)


def dense_covariance(Phi, gamma, sigma2):
    return sigma2 * np.eye(Phi.shape[0]) + (Phi * gamma) @ Phi.T


def dense_loglik(Phi, gamma, sigma2, y):
    C = dense_covariance(Phi, gamma, sigma2)
    _, logdet = np.linalg.slogdet(C)
    n = len(y)
    return -0.5 * (y @ np.linalg.solve(C, y) + logdet + n * np.log(2 * np.pi))


def dense_qs(Phi, gamma, sigma2, y):
    """Leave-one-out ``q_i, s_i`` from an explicit ``C_{-i}`` per column."""
    m = Phi.shape[1]
    q = np.empty(m)
    s = np.empty(m)
    for i in range(m):
        g = gamma.copy()
        g[i] = 0.0
        Ci = np.linalg.inv(dense_covariance(Phi, g, sigma2))
        q[i] = Phi[:, i] @ Ci @ y
        s[i] = Phi[:, i] @ Ci @ Phi[:, i]
    return q, s


def incoherent_dictionary(rng, log2n, m):
    """``m`` columns of a randomly rotated ``[I | H / sqrt(n)]`` with random
    signs; coherence is at most ``1/sqrt(n)``."""
    n = 2**log2n
    full = np.hstack([np.eye(n), hadamard(n) / np.sqrt(n)])
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    cols = np.sort(rng.choice(2 * n, size=m, replace=False))
    signs = rng.choice([-1.0, 1.0], size=m)
    return Dictionary.from_array(Q @ full[:, cols] * signs)


def best_subset(Phi, y, k):
    """Exhaustive minimizer of the residual over all ``k``-subsets."""
    best, arg = np.inf, None
    for S in itertools.combinations(range(Phi.shape[1]), k):
        v = residual_sq(Phi, S, y)
        if v < best:
            best, arg = v, S
    return arg, best


def sphere(rng, n, radius):
    e = rng.standard_normal(n)
    return e * (radius / np.linalg.norm(e))


# ---------------------------------------------------------------- high precision bounds


def mp_forward_noise_bound(mu1, x_min):
    mu1, x_min = mp.mpf(mu1), mp.mpf(x_min)
    return (1 - 2 * mu1) / mp.sqrt(2 * (1 + mu1)) * x_min if mu1 < 0.5 else mp.mpf(0)


def mp_backward_noise_bound(smin, x_min):
    smin, x_min = mp.mpf(smin), mp.mpf(x_min)
    return smin / mp.sqrt(2 * (2 - smin**2)) * x_min


def mp_superset_bound(mu1, x_min):
    mu1, x_min = mp.mpf(mu1), mp.mpf(x_min)
    return mp.sqrt((1 - mu1) / (2 * (1 + mu1))) * x_min


def mp_baseline(m, delta):
    delta = mp.mpf(delta)
    return max(mp.mpf(0), 1 - 2 * m * mp.exp(-delta**2 / 2) / delta)


def mp_forward_probability(mu1_k, mu1_2k, m, k, delta):
    mu1_k, mu1_2k, delta = mp.mpf(mu1_k), mp.mpf(mu1_2k), mp.mpf(delta)
    d = mp.ceil(mp.mpf(m) / k)
    kappa = (1 + mu1_2k) / (1 - mu1_k)

    def clamp(v):
        return min(mp.mpf(1), max(mp.mpf(0), v))

    b1 = clamp(1 - d * ((1 + kappa) / (1 - mu1_2k)) ** (mp.mpf(k) / 2) * mp.erfc(delta / mp.sqrt(2 * kappa)) ** k)
    b2 = None
    if mu1_2k < 0.5:
        b2 = clamp(1 - d * (4 / (mp.sqrt(mp.pi) * delta) * mp.exp(-delta**2 / 6)) ** k)
    return b1, b2
