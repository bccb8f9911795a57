"""Sparse kernel regression with a Matern-3/2 dictionary.

Run with ``python demos/03_kernel_walkthrough.py [data.csv]``.  Without an
argument it uses synthetic data whose generating function is a sum of a
few kernel bumps.  A scatter plot of test RMSE against sparsity is written
to ``kernel_frontier.svg`` in the working directory.
"""

# %%
import sys

import numpy as np

from sparse_pursuit import svg
from sparse_pursuit.kernel import (
    forward_frontier,
    kernel_regression_experiment,
    load_dataset,
    matched_comparison,
    synthetic_kernel_data,
)

if len(sys.argv) > 1:
    X, y = load_dataset(sys.argv[1])
    center = True
else:
    # the synthetic model has no intercept, so the response is left uncentered
    X, y, _ = synthetic_kernel_data(240, 2, 8, 0.05, seed=1, split_seed=0)
    center = False
print("rows, features:", X.shape)

# %% [markdown]
# Each tolerance gives one model per algorithm.  Larger tolerances give
# sparser models; the forward frontier fits every sparsity along one
# Forward Regression path.

# %%
splits = [0, 1, 2]
deltas = float(np.std(y)) * np.geomspace(0.05, 1.0, 8)
results = kernel_regression_experiment(X, y, splits, deltas, algorithms=("rmp0_plus", "rmp_sigma"),
                                       center=center)
top = max(r.sparsity for r in results)
frontier = {s: forward_frontier(X, y, s, top, center=center) for s in splits}
for r in results:
    if r.split == 0:
        print(f"{r.algorithm:>10} delta={r.delta:8.4f} sparsity={r.sparsity:4d} rmse={r.rmse:.4f}")

# %%
print("rmp0_plus at or below the forward frontier per split:", matched_comparison(results, frontier))

# %%
series = {"fr": (list(range(1, top + 1)), list(frontier[0]))}
for r in results:
    if r.split == 0 and r.error is None:
        xs, ys = series.setdefault(r.algorithm, ([], []))
        xs.append(r.sparsity)
        ys.append(r.rmse)
svg.write("kernel_frontier.svg", svg.scatter(series, title="test RMSE vs sparsity",
                                             x_name="sparsity", y_name="test RMSE"))
print("wrote kernel_frontier.svg")
