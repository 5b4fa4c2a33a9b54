"""Regeneration times of a walk path and the i.i.d. increment samples they produce."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..environment.config import LadderConfig
from ..walker.walk import Trajectory


@dataclass(frozen=True)
class RegenerationRecord:
    """Regeneration times ``taus`` and positions ``rhos``, with ``taus[0] = 0``.

    ``m_values`` holds the martingale at each regeneration time when known.
    ``censored_tail`` counts candidates too close to the final position to
    be confirmed.
    """

    taus: np.ndarray
    rhos: np.ndarray
    cutoff: int
    censored_tail: int
    m_values: np.ndarray = None

    @property
    def count(self) -> int:
        return int(self.taus.size) - 1


def candidate_regenerations(x_path: np.ndarray, is_pre_regen) -> tuple[np.ndarray, np.ndarray]:
    """First hitting times of pre-regeneration columns right of the start after which
    the walk never comes back to that column or below.

    ``is_pre_regen(cols)`` maps an array of x-coordinates to a boolean mask.
    Returns ``(times, columns)``.
    """
    x = np.asarray(x_path)
    x0 = int(x[0])
    running = np.maximum.accumulate(x)
    new_max = np.flatnonzero(np.diff(running) > 0) + 1
    times = new_max[x[new_max] > x0]
    cols = x[times]
    keep = is_pre_regen(cols)
    times, cols = times[keep], cols[keep]
    # minimum of x strictly after each time
    future_min = np.minimum.accumulate(x[::-1])[::-1]
    after = np.append(future_min[1:], np.iinfo(np.int64).max)
    ok = after[times] > cols
    return times[ok], cols[ok]


def detect_regenerations(trajectory: Trajectory, config: LadderConfig, cutoff: int = 30) -> RegenerationRecord:
    """Regenerations of a trajectory on an annotated window.

    A pre-regeneration point first reached at time t counts when the walk
    never returns to its column or further left after t. Candidates with the
    final position within ``cutoff`` columns are censored.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    pre = config.pre_regen
    x = trajectory.x_path

    def is_pre(cols):
        return pre[cols - config.x_min]

    times, cols = candidate_regenerations(x, is_pre)
    keep = int(x[-1]) > cols + cutoff
    m = trajectory.m_path
    taus = np.concatenate([[0], times[keep]]).astype(np.int64)
    rhos = np.concatenate([[x[0]], cols[keep]]).astype(np.int64)
    return RegenerationRecord(taus, rhos, int(cutoff), int((~keep).sum()), m[taus])


def record_from_replica(rep, cutoff: int = 30) -> RegenerationRecord:
    """Record from a batch replica (start at x = 0, time 0)."""
    tau, rho, mv, cens = rep.regenerations(cutoff)
    return RegenerationRecord(
        np.concatenate([[0], tau]).astype(np.int64), np.concatenate([[0], rho]).astype(np.int64),
        int(cutoff), cens, np.concatenate([[0.0], mv]),
    )


@dataclass(frozen=True)
class IncrementSample:
    """Pairs ``(tau_{k+1} - tau_k, rho_{k+1} - rho_k)`` for k >= 1 and martingale increments.

    ``seeds[j]`` is the replica seed of pair j.
    """

    tau_inc: np.ndarray
    rho_inc: np.ndarray
    m_inc: np.ndarray
    seeds: np.ndarray = field(default=None)

    def __post_init__(self):
        if np.any(self.tau_inc <= 0) or np.any(self.rho_inc <= 0):
            raise ValueError("increments must be positive")

    @property
    def size(self) -> int:
        return int(self.tau_inc.size)

    @classmethod
    def from_records(cls, records, seeds=None) -> "IncrementSample":
        t, r, m, s = [], [], [], []
        for j, rec in enumerate(records):
            if rec.taus.size < 3:
                continue
            t.append(np.diff(rec.taus[1:]))
            r.append(np.diff(rec.rhos[1:]))
            mv = rec.m_values if rec.m_values is not None else np.full(rec.taus.size, np.nan)
            m.append(np.diff(mv[1:]))
            s.append(np.full(rec.taus.size - 2, -1 if seeds is None else seeds[j], np.int64))
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        return cls(cat(t, np.int64), cat(r, np.int64), cat(m, float), cat(s, np.int64))

    @classmethod
    def from_batch(cls, batch, cutoff: int = 30) -> "IncrementSample":
        good = batch.good()
        return cls.from_records([record_from_replica(r, cutoff) for r in good], [r.seed for r in good])
