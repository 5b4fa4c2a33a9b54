"""
The derivative of the speed as a covariance
===========================================

At lambda* below lambda_c / 2 the pair (X_n - n v, M_n) / sqrt(n) is close
to Gaussian and the derivative of the speed equals the limiting covariance
sigma_12. Here both sides are estimated at a reduced budget.
"""

import math

from ladderwalk.analysis import clt_suite, derivative_via_covariance, finite_difference
from ladderwalk.regeneration import IncrementSample, speed_estimate
from ladderwalk.walker import simulate_batch

p, lam, h, seed = 0.5, 0.3, 0.05, 3
n, replicas = 20_000, 2000


def speed(b):
    return speed_estimate(IncrementSample.from_batch(b, 30))


v = {x: speed(simulate_batch(p, x, n, replicas, seed, "nb-speed")) for x in (lam - h, lam, lam + h)}
b = simulate_batch(p, lam, n, replicas, seed, "nb-cov", checkpoints=[n // 2, n])
x, m = b.at("cp_x"), b.at("cp_m")

sig = derivative_via_covariance(x[:, 1], m[:, 1], n, v[lam].estimate)
fd = finite_difference(v[lam + h], v[lam - h], h)
print(f"sigma12           = {sig.estimate:.4f} +- {sig.se:.4f}")
print(f"finite difference = {fd.estimate:.4f} +- {fd.se:.4f}")
print(f"z = {(sig.estimate - fd.estimate) / math.hypot(sig.se, fd.se):.2f}")

# %%
# Normality of the two marginals and independence of the two halves.
cov, norm = clt_suite(x[:, 0], x[:, 1], m[:, 0], m[:, 1], n, lam, v[lam].estimate)
print(cov.matrix)
print(f"KS p-values: X {norm.p_x:.3f}, M {norm.p_m:.3f}; half-increment correlation {norm.increment_corr_x:.3f}")
