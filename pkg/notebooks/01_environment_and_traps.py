"""
The conditioned ladder cluster and its traps
============================================

Sample a window of the infinite cluster, look at it, and compare trap
statistics with what the transfer matrix predicts.
"""

import numpy as np

from ladderwalk.environment import (
    build_transfer_matrix, compute_lambda_c, sample_environment_chain, text_dump, trap_length_pmf,
)

p = 0.5
tm = build_transfer_matrix(p)
print(f"lambda_c({p}) = {compute_lambda_c(p):.6f}")
print("stationary law of the t-states (01, 10, 11):", np.round(tm.pi, 4))

# %%
# A short window: one line per column with slab, t-state and annotations.
cfg = sample_environment_chain(tm, 30, 7)
print(text_dump(cfg))

# %%
# Trap lengths are geometric with ratio exp(-2 lambda_c). Count them in a
# long window and compare with the exact law.
big = sample_environment_chain(tm, 2_000_000, 1)
lengths = np.array([tp.b - tp.a for tp in big.traps])
print(f"{lengths.size} traps in {big.n_columns} columns")
print(" m   empirical   exact")
for m in range(1, 7):
    emp = np.mean(lengths == m)
    exact = trap_length_pmf(p, m)
    print(f"{m:2d}   {emp:.5f}    {exact:.5f}")
print("ratio of consecutive probabilities:", np.exp(-2 * compute_lambda_c(p)))

# %%
# The critical bias is symmetric in p and smallest at p = 1/2.
grid = np.linspace(0.05, 0.95, 19)
for q, lc in zip(grid, map(compute_lambda_c, grid)):
    print(f"p={q:.2f}  lambda_c={lc:.4f}  lambda_c/2={lc / 2:.4f}")
