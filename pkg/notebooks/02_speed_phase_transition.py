"""
Speed of the biased walk across the critical bias
=================================================

Two estimators of the speed: the regeneration ratio E[rho]/E[tau] and the
plain displacement X_N / N. Below lambda_c they agree on a positive value;
above it the estimates keep falling as the horizon grows.
"""

from ladderwalk.environment import compute_lambda_c
from ladderwalk.regeneration import IncrementSample, direct_speed, speed_estimate
from ladderwalk.walker import simulate_batch

p, seed = 0.5, 11
lc = compute_lambda_c(p)
print(f"lambda_c = {lc:.4f}, lambda_c / 2 = {lc / 2:.4f}")

print("lambda   regeneration          direct")
for lam in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.9, 1.2):
    b = simulate_batch(p, lam, 200_000, 40, seed, f"notebook-speed:{lam}")
    reg = speed_estimate(IncrementSample.from_batch(b, 30))
    direct = direct_speed([r.x_final for r in b.good()], b.n_steps)
    print(f"{lam:5.2f}   {reg.estimate:.4f} +- {reg.se:.4f}   {direct.estimate:.4f} +- {direct.se:.4f}")

# %%
# Above lambda_c the estimate at a fixed number of replicas decreases with
# the horizon instead of settling: X_n grows like n^(lambda_c / lambda).
lam = 1.2
for n in (10**4, 10**5, 10**6):
    b = simulate_batch(p, lam, n, 40, seed, f"notebook-budget:{n}")
    r = speed_estimate(IncrementSample.from_batch(b, 30))
    print(f"n={n:>8d}  v={r.estimate:.4f} +- {r.se:.4f}")
