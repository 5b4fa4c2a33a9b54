"""Compiled Monte Carlo engine for long walks under the cycle-stationary law.

Each replica starts at a pre-regeneration point at x = 0. The environment to
the left consists of whole cycles covering a fixed margin; to the right it is
grown on demand from the conditioned chain. Only summaries are kept: the
position, martingale, quadratic Taylor term and log density ratios at
checkpoint times, and the detected regeneration times.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..environment import _kernels as K
from ..environment.config import LadderConfig, annotate
from ..environment.model import H0, H1, LEVEL0, V
from ..environment.sampling import palm_first_slab_table
from ..environment.transfer import build_transfer_matrix
from ..seeding import replica_seed
from .kernel import kernel_tables

LOOKAHEAD = 128


@njit(cache=True)
def _palm_prefix(cum_first, cP, cs, margin, cap, rng):
    """Chain from a pre-regeneration column until one at offset >= margin."""
    t = np.empty(cap, np.int8)
    s = np.zeros(cap, np.uint8)
    t[0] = 2
    code = K._draw(cum_first, rng.random())
    t[1] = code // 8 + 1
    s[1] = code % 8
    k = 1
    while True:
        if k + 2 >= cap:
            cap *= 2
            t2 = np.empty(cap, np.int8)
            s2 = np.zeros(cap, np.uint8)
            t2[:k + 1] = t[:k + 1]
            s2[:k + 1] = s[:k + 1]
            t, s = t2, s2
        i = t[k] - 1
        j = K._draw(cP[i], rng.random())
        s[k + 1] = K._draw(cs[i, j], rng.random())
        t[k + 1] = j + 1
        if k >= margin and (t[k] & LEVEL0) != 0 and (s[k] & (V | H1)) == 0 and (s[k + 1] & H1) == 0:
            return t, s, k, k + 2
        k += 1


@njit(cache=True)
def _pattern(s, k, y):
    bit = H0 if y == 0 else H1
    c = 0
    if s[k + 1] & bit:
        c |= 1
    if k > 0 and (s[k] & bit):
        c |= 2
    if k > 0 and (s[k] & V):
        c |= 4
    return c


@njit(cache=True)
def _simulate(cum_first, cP, cs, margin, cum, nu, aterm, lr, n_steps, checkpoints, record_path, rng):
    t0, s0, origin, n_env = _palm_prefix(cum_first, cP, cs, margin, 4 * margin + 4 * LOOKAHEAD, rng)
    # the walk cannot outrun n_steps columns, so the environment never needs reallocating
    size = origin + n_steps + 8 * LOOKAHEAD
    t = np.empty(size, np.int8)
    s = np.zeros(size, np.uint8)
    t[:n_env] = t0[:n_env]
    s[:n_env] = s0[:n_env]
    n_alt = lr.shape[0]
    n_cp = checkpoints.shape[0]
    cp_x = np.zeros(n_cp, np.int64)
    cp_m = np.zeros(n_cp)
    cp_a = np.zeros(n_cp)
    cp_lr = np.zeros((n_cp, n_alt))
    path = np.zeros(n_steps + 1 if record_path else 1, np.int32)
    # at most one candidate per column reached
    c_col = np.empty(size, np.int32)
    c_time = np.empty(size, np.int64)
    c_m = np.empty(size)
    top = 0
    lrsum = np.zeros(n_alt)
    k, y = origin, 0
    kmax = origin
    m = 0.0
    a = 0.0
    ci = 0
    steps_done = n_steps
    flagged = False
    for step in range(n_steps):
        if k + LOOKAHEAD >= n_env:
            new_n = min(n_env + 4 * LOOKAHEAD, t.shape[0])
            K.chain_continue(cP, cs, t, s, n_env, new_n, rng)
            n_env = new_n
        c = _pattern(s, k, y)
        u = rng.random()
        mv = 0
        while u >= cum[c, mv]:
            mv += 1
        m += nu[c, mv]
        a += aterm[c, mv]
        for j in range(n_alt):
            lrsum[j] += lr[j, c, mv]
        if mv == 1:
            k += 1
        elif mv == 2:
            k -= 1
        elif mv == 3:
            y = 1 - y
        now = step + 1
        if record_path:
            path[now] = k - origin
        while top > 0 and c_col[top - 1] >= k:
            top -= 1
        if k > kmax:
            kmax = k
            if (t[k] & LEVEL0) != 0 and (s[k] & (V | H1)) == 0 and (s[k + 1] & H1) == 0:
                c_col[top] = k
                c_time[top] = now
                c_m[top] = m
                top += 1
        while ci < n_cp and checkpoints[ci] == now:
            cp_x[ci] = k - origin
            cp_m[ci] = m
            cp_a[ci] = a
            cp_lr[ci] = lrsum
            ci += 1
        if k == 0:
            flagged = True
            steps_done = now
            break
    if record_path:
        env_t, env_s = t[:n_env].copy(), s[:n_env].copy()
    else:
        env_t, env_s = t[:0].copy(), s[:0].copy()
    return (cp_x, cp_m, cp_a, cp_lr, c_col[:top] - origin, c_time[:top], c_m[:top],
            k - origin, m, steps_done, flagged, path, env_t, env_s, origin)


@dataclass
class ReplicaResult:
    seed: int
    x_final: int
    m_final: float
    steps: int
    flagged: bool
    cp_x: np.ndarray
    cp_m: np.ndarray
    cp_a: np.ndarray
    cp_lr: np.ndarray
    # surviving candidates: regenerations unless censored
    reg_rho: np.ndarray
    reg_tau: np.ndarray
    reg_m: np.ndarray
    path: np.ndarray = field(default=None, repr=False)
    environment: object = field(default=None, repr=False)

    def regenerations(self, cutoff: int):
        """``(tau, rho, M_tau, n_censored)`` keeping candidates with ``x_final > rho + cutoff``."""
        keep = self.x_final > self.reg_rho + cutoff
        return self.reg_tau[keep], self.reg_rho[keep], self.reg_m[keep], int((~keep).sum())


@dataclass
class BatchResult:
    """Replica summaries of one simulation setting."""

    p: float
    lam: float
    n_steps: int
    checkpoints: np.ndarray
    alt_lambdas: tuple
    master_seed: int
    tag: str
    replicas: list

    @property
    def seeds(self) -> np.ndarray:
        return np.array([r.seed for r in self.replicas], dtype=np.int64)

    @property
    def flagged(self) -> np.ndarray:
        return np.array([r.flagged for r in self.replicas], dtype=bool)

    @property
    def discard_rate(self) -> float:
        return float(self.flagged.mean()) if self.replicas else 0.0

    def good(self) -> list:
        return [r for r in self.replicas if not r.flagged]

    def at(self, field_name: str) -> np.ndarray:
        """Stacked checkpoint array over unflagged replicas, e.g. ``at("cp_x")``."""
        return np.stack([getattr(r, field_name) for r in self.good()])


def simulate_replica(p, lam, n_steps, seed, checkpoints=(), alt_lambdas=(), margin=200, record_path=False):
    """One replica. With ``record_path`` the x-path and the generated environment are kept."""
    tm = build_transfer_matrix(p)
    _, cP, cs = tm.cumulative_tables()
    tab = kernel_tables(lam)
    aterm = 0.5 * (tab.nu**2 - tab.d2)
    if alt_lambdas:
        with np.errstate(invalid="ignore"):
            lr = np.stack([kernel_tables(b).log_p - tab.log_p for b in alt_lambdas])
        lr = np.where(np.isfinite(lr), lr, 0.0)
    else:
        lr = np.zeros((0, 8, 4))
    cps = np.asarray(sorted(checkpoints), dtype=np.int64)
    if cps.size and (cps[0] < 1 or cps[-1] > n_steps):
        raise ValueError("checkpoints must lie in 1..n_steps")
    gen = np.random.default_rng(seed)
    out = _simulate(palm_first_slab_table(tm), cP, cs, int(margin), tab.cum, tab.nu, aterm, lr,
                    int(n_steps), cps, bool(record_path), gen)
    cp_x, cp_m, cp_a, cp_lr, rho, tau, mreg, xf, mf, steps, flagged, path, env_t, env_s, origin = out
    env = None
    if record_path:
        env = LadderConfig(-int(origin), env_t.size - 1 - int(origin), env_s[1:], env_t, p=float(p),
                           seed=int(seed), sampler="cycle-stationary", boundary_pre_regen=True)
        env = annotate(env)
    return ReplicaResult(int(seed), int(xf), float(mf), int(steps), bool(flagged), cp_x, cp_m, cp_a, cp_lr,
                         rho, tau, mreg, path if record_path else None, env)


def simulate_batch(p: float, lam: float, n_steps: int, replicas: int, master_seed: int, tag: str = "batch",
                   checkpoints=(), alt_lambdas=(), margin: int = 200, first_replica: int = 0) -> BatchResult:
    """Run ``replicas`` independent walks of ``n_steps`` steps.

    Replica ``r`` uses the seed ``replica_seed(master_seed, r, tag)``, so any
    subset of replicas can be rerun on its own.
    """
    res = []
    for r in range(first_replica, first_replica + replicas):
        seed = replica_seed(master_seed, r, tag)
        res.append(simulate_replica(p, lam, n_steps, seed, checkpoints, alt_lambdas, margin))
    return BatchResult(float(p), float(lam), int(n_steps), np.asarray(sorted(checkpoints), np.int64),
                       tuple(alt_lambdas), int(master_seed), tag, res)
