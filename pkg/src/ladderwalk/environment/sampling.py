"""Samplers for the conditioned ladder environment.

Three routes to (windows of) the same infinite-volume law:

* ``sample_environment_chain``: the stationary conditioned t-state chain,
  slabs drawn given consecutive t-states.
* ``sample_environment_rejection``: i.i.d. bond percolation on a finite
  window, kept only if it contains a left-right crossing.
* ``sample_cycle_stationary``: i.i.d. cycles between pre-regeneration
  points, started at a pre-regeneration point at x = 0.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from . import _kernels as K
from .config import LadderConfig, annotate
from .model import H1, LEVEL0, V, slab_weights
from .transfer import TransferMatrix, build_transfer_matrix

PRE_REGEN_STATE = 2  # t-state 10


class BudgetError(RuntimeError):
    """Rejection sampling ran out of attempts."""

    def __init__(self, message, attempts, accepted):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _seed_of(rng):
    return rng if isinstance(rng, (int, np.integer)) else None


def sample_environment_chain(tm: TransferMatrix, n_columns: int, rng, x_min: int = 0) -> LadderConfig:
    """Window of ``n_columns`` slabs from the stationary conditioned chain.

    Columns ``x_min..x_min+n_columns``; the boundary t-state is drawn from
    the stationary law.
    """
    if n_columns < 1:
        raise ValueError("n_columns must be >= 1")
    seed = _seed_of(rng)
    gen = as_generator(rng)
    cpi, cP, cs = tm.cumulative_tables()
    t, s = K.chain_fill(cpi, cP, cs, int(n_columns), gen)
    cfg = LadderConfig(x_min, x_min + n_columns, s[1:].copy(), t, p=tm.p, seed=seed, sampler="chain")
    return annotate(cfg)


def sample_environment_rejection(p: float, N1: int, N2: int, rng, max_attempts: int = 1_000_000) -> LadderConfig:
    """I.i.d. percolation on columns ``-N1..N2`` conditioned on a crossing.

    The left boundary column acts as a source (both vertices are starting
    points of the crossing), so its t-state is 11.

    Raises
    ------
    BudgetError
        If no crossing configuration appears within ``max_attempts``.
    """
    if N1 < 1 or N2 < 1:
        raise ValueError("N1 and N2 must be >= 1")
    seed = _seed_of(rng)
    gen = as_generator(rng)
    cum_w = np.cumsum(slab_weights(p))
    n = int(N1 + N2)
    s, attempts = K.rejection_fill(cum_w, n, int(max_attempts), gen)
    if attempts < 0:
        raise BudgetError(
            f"no crossing of {n} columns at p={p} in {max_attempts} attempts "
            f"(empirical acceptance rate 0/{max_attempts})",
            attempts=int(max_attempts), accepted=0,
        )
    t = K.propagate(np.int8(3), s)
    cfg = LadderConfig(-int(N1), int(N2), s[1:].copy(), t, p=float(p), seed=seed, sampler="rejection")
    return annotate(cfg)


def rejection_acceptance_rate(p: float, n_columns: int, n_attempts: int, rng) -> float:
    """Empirical crossing probability of ``n_columns`` i.i.d. slabs."""
    gen = as_generator(rng)
    return _acceptance(np.cumsum(slab_weights(p)), int(n_columns), int(n_attempts), gen) / n_attempts


@njit(cache=True)
def _acceptance(cum_w, n, n_attempts, rng):
    hits = 0
    for _ in range(n_attempts):
        state = 3
        for _k in range(n):
            state = K.update(state, K._draw(cum_w, rng.random()))
            if state == 0:
                break
        if state != 0:
            hits += 1
    return hits


def palm_first_slab_table(tm: TransferMatrix) -> np.ndarray:
    """Cumulative joint law of (next t-state, slab) after a pre-regeneration column.

    From t-state 10, conditioned on the top horizontal of the next slab
    being closed. Shape (3 * 8,), flattened as ``state_index * 8 + slab``.
    """
    i = tm.state_index(PRE_REGEN_STATE)
    joint = tm.P_cond[i][:, None] * tm.slab_laws[i]
    mask = (np.arange(8) & H1) == 0
    joint = joint * mask[None, :]
    joint /= joint.sum()
    return np.cumsum(joint.ravel())


@njit(cache=True)
def _palm_fill(cum_first, cum_P, cum_slab, n_cycles, rng):
    cap = 64
    t = np.empty(cap, np.int8)
    s = np.zeros(cap, np.uint8)
    t[0] = PRE_REGEN_STATE
    code = K._draw(cum_first, rng.random())
    t[1] = code // 8 + 1
    s[1] = code % 8
    ends = np.empty(n_cycles, np.int64)
    found = 0
    k = 1
    while True:
        if k + 1 >= cap:
            cap *= 2
            t2 = np.empty(cap, np.int8)
            s2 = np.zeros(cap, np.uint8)
            t2[:k + 1] = t[:k + 1]
            s2[:k + 1] = s[:k + 1]
            t, s = t2, s2
        i = t[k] - 1
        j = K._draw(cum_P[i], rng.random())
        s[k + 1] = K._draw(cum_slab[i, j], rng.random())
        t[k + 1] = j + 1
        if (t[k] & LEVEL0) != 0 and (s[k] & (V | H1)) == 0 and (s[k + 1] & H1) == 0:
            ends[found] = k
            found += 1
            if found == n_cycles:
                return t[:k + 2].copy(), s[:k + 2].copy(), ends
        k += 1


def sample_cycle_stationary(tm: TransferMatrix, n_cycles: int, rng, n_left_cycles: int = 0) -> LadderConfig:
    """Environment under the cycle-stationary law, pre-regeneration point at 0.

    The chain is started at a pre-regeneration column and cut at the
    ``n_left_cycles + n_cycles``-th following pre-regeneration column; the
    window is shifted so that the end of the ``n_left_cycles``-th cycle sits
    at x = 0. One extra column beyond the last cycle is kept so that its
    isolation pattern is visible.
    """
    if n_cycles < 1 or n_left_cycles < 0:
        raise ValueError("need n_cycles >= 1 and n_left_cycles >= 0")
    seed = _seed_of(rng)
    gen = as_generator(rng)
    _, cP, cs = tm.cumulative_tables()
    t, s, ends = _palm_fill(palm_first_slab_table(tm), cP, cs, int(n_cycles + n_left_cycles), gen)
    origin = 0 if n_left_cycles == 0 else int(ends[n_left_cycles - 1])
    x_min = -origin
    cfg = LadderConfig(
        x_min, x_min + t.size - 1, s[1:].copy(), t,
        p=tm.p, seed=seed, sampler="cycle-stationary", boundary_pre_regen=True,
    )
    return annotate(cfg)


def cycle_lengths(config: LadderConfig) -> np.ndarray:
    """Spacings between consecutive pre-regeneration points of a config."""
    return np.diff(config.pre_regeneration_points())


# ---------------------------------------------------------------------------
# batch statistics at a fixed column, used for cross-sampler checks

@njit(cache=True)
def _column_record(s, t, c, out, row):
    fc = K.forwards(s, t)
    n = s.shape[0]
    cl0 = (t[c] & LEVEL0) != 0 or fc[c, 0]
    cl1 = (t[c] & 1) != 0 or fc[c, 1]
    out[row, 0] = t[c]
    out[row, 1] = 1 if ((t[c] & LEVEL0) != 0 and (s[c] & (V | H1)) == 0 and (s[c + 1] & H1) == 0) else 0
    length = 0
    if (s[c] & V) != 0 and (cl0 or cl1):
        j = c + 1
        while j < n and s[j] == K.TRAP_BODY:
            j += 1
        if j < n and j - 1 > c:
            e = s[j] & 3
            if e == 1 or e == 2:
                length = j - 1 - c
    out[row, 2] = length


@njit(cache=True)
def _chain_batch(cpi, cP, cs, n_columns, c, n_samples, rng):
    out = np.zeros((n_samples, 3), np.int64)
    for r in range(n_samples):
        t, s = K.chain_fill(cpi, cP, cs, n_columns, rng)
        _column_record(s, t, c, out, r)
    return out


@njit(cache=True)
def _rejection_batch(cum_w, n_columns, c, n_samples, max_attempts, rng):
    out = np.zeros((n_samples, 3), np.int64)
    total = 0
    for r in range(n_samples):
        s, attempts = K.rejection_fill(cum_w, n_columns, max_attempts, rng)
        if attempts < 0:
            return out[:r], total + max_attempts, r
        total += attempts
        t = K.propagate(3, s)
        _column_record(s, t, c, out, r)
    return out, total, n_samples


def column_statistics_batch(sampler: str, p: float, n_left: int, n_right: int, n_samples: int, rng,
                            max_attempts: int = 1_000_000) -> np.ndarray:
    """Per-window records at the column with ``n_left`` columns to its left.

    Each row is ``(t_state, pre_regen, trap_length)`` where ``trap_length`` is
    the length of the trap piece whose open vertical sits at that column (0
    if none). Windows have ``n_left + n_right`` slabs.

    Parameters
    ----------
    sampler : {"chain", "rejection"}
    """
    gen = as_generator(rng)
    n_columns = int(n_left + n_right)
    if sampler == "chain":
        cpi, cP, cs = build_transfer_matrix(p).cumulative_tables()
        return _chain_batch(cpi, cP, cs, n_columns, int(n_left), int(n_samples), gen)
    if sampler == "rejection":
        out, attempts, accepted = _rejection_batch(
            np.cumsum(slab_weights(p)), n_columns, int(n_left), int(n_samples), int(max_attempts), gen
        )
        if accepted < n_samples:
            raise BudgetError(
                f"budget of {max_attempts} attempts exhausted after {accepted} windows; "
                f"acceptance rate {accepted / attempts:.3g}",
                attempts=attempts, accepted=accepted,
            )
        return out
    raise ValueError(f"unknown sampler {sampler!r}")
