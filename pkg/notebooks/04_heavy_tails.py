"""
Heavy tails from traps
======================

Regeneration times have tail index lambda_c / lambda. Between lambda_c / 2
and lambda_c the variance is infinite, so second moments of the increments
and of the time spent in single traps keep growing with the sample size.
"""

import numpy as np

from ladderwalk.analysis import trap_sojourn_moments, trap_sojourn_times
from ladderwalk.environment import Vertex, build_transfer_matrix, compute_lambda_c, sample_environment_chain
from ladderwalk.regeneration import IncrementSample, moment_diagnostic, tail_index_hill
from ladderwalk.walker import run_walk, simulate_batch

p = 0.5
lc = compute_lambda_c(p)

# %%
# Hill estimates of the regeneration-time tail.
for lam in (0.5, 0.7):
    b = simulate_batch(p, lam, 2_000_000, 10, 1, f"nb-tail:{lam}")
    tau = IncrementSample.from_batch(b, 30).tau_inc
    for k in (100, 300, 1000):
        h = tail_index_hill(tau, k)
        print(f"lambda={lam}  k={k:4d}  alpha={h.estimate:.3f} +- {h.se:.3f}  (lambda_c/lambda={lc / lam:.3f})")
    curve = moment_diagnostic(tau, 2.0)
    print("  running second moments:", np.array2string(curve.moments[-4:], precision=0))

# %%
# Time spent inside individual traps along one long walk.
tm = build_transfer_matrix(p)
for lam in (0.3, 0.7):
    cfg = sample_environment_chain(tm, 400_000, 5)
    start = Vertex(cfg.x_min + 100, int(np.argmax(cfg.backbone[100])))
    traj = run_walk(cfg, lam, start, 2_000_000, 9)
    t = trap_sojourn_times(traj, cfg)
    t = t[t > 0]
    rep = trap_sojourn_moments(t, 2.0, levels=5)
    print(f"lambda={lam}: {t.size} traps entered, growth of 2nd moment over the last decade {rep.growth():.2f}")
