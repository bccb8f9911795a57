"""Checking recovery guarantees for a given dictionary.

Run with ``python demos/02_guarantees_walkthrough.py``.
"""

# %% [markdown]
# Coherence and the Babel function summarize how far a dictionary is from
# orthogonal.  Small values make forward and backward selection provably
# exact for small enough noise.

# %%
import numpy as np

from sparse_pursuit import (
    Dictionary,
    StopRule,
    babel,
    baseline_success_probability,
    coherence,
    erc,
    forward_noise_bound,
    forward_regression,
    forward_success_probability,
    guarantee_report,
    subset_selection_certificate,
)

# a union of the identity and a normalized Hadamard basis is very incoherent
H = np.array([[1.0]])
for _ in range(6):
    H = np.block([[H, H], [H, -H]])
d = Dictionary.from_array(np.hstack([np.eye(64), H]))
print("coherence:", coherence(d))
print("Babel mu1(k) for k = 1..4:", [round(babel(d, k), 3) for k in range(1, 5)])

# %% [markdown]
# With Babel below one half the forward bound is positive.  Any noise
# smaller than it leaves Forward Regression exact, which we check on one
# instance at 90% of the bound.

# %%
k, x_min = 3, 1.0
bound = forward_noise_bound(babel(d, k), x_min)
print(f"noise bound for k={k}: {bound:.4f}")
rng = np.random.default_rng(0)
support = [3, 21, 90]
x = np.zeros(d.m)
x[support] = [1.0, -1.5, 1.2]
noise = rng.standard_normal(d.n)
y = d.data @ x + 0.9 * bound * noise / np.linalg.norm(noise)
path = forward_regression(d, y, StopRule.sparsity(k))
print("recovered:", path.final_support, " ERC value on the truth:", round(erc(d, support), 3))

# %% [markdown]
# For a determined system (no more columns than rows) the certificate can
# prove that a support is the best of all supports of its size, without
# enumerating them.  A negative margin means "not proven", not "wrong".

# %%
small = Dictionary.from_array(rng.standard_normal((12, 10)))
x_small = np.zeros(10)
x_small[[1, 4, 7]] = [2.0, -1.0, 1.5]
for scale in (0.01, 2.0):
    y_small = small.data @ x_small + scale * rng.standard_normal(12)
    found = forward_regression(small, y_small, StopRule.sparsity(3)).final_support
    ok, margin = subset_selection_certificate(small, found, y_small)
    print(f"noise {scale}: support {found} certified={ok} margin={margin:+.4f}")

# %% [markdown]
# The probabilistic bounds for Gaussian noise climb to one much earlier than
# the classical baseline as the signal-to-noise ratio delta grows.

# %%
for delta in (2.0, 3.0, 4.0, 5.0, 6.0):
    b1, b2 = forward_success_probability(0.1, 0.3, 16, 4, delta)
    print(f"delta={delta:3.1f}  bound1={b1:.4f}  bound2={b2:.4f}  "
          f"baseline={baseline_success_probability(16, delta):.4f}")

# %%
print(guarantee_report(d, 3, x_min=1.0, support=support, deltas=[3.0, 5.0]))
