"""Estimators built on regeneration increments and checkpointed walks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..environment.model import compute_lambda_c


class InsufficientSampleError(ValueError):
    pass


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    se: float
    n: int
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.se >= 0:
            raise ValueError("standard error must be non-negative")

    def z(self, value: float = 0.0) -> float:
        return (self.estimate - value) / self.se if self.se > 0 else math.copysign(math.inf, self.estimate - value)

    def to_dict(self) -> dict:
        return asdict(self)


def speed_estimate(sample) -> EstimateReport:
    """Ratio of mean position increment to mean time increment, delta-method SE."""
    r = np.asarray(sample.rho_inc, float)
    t = np.asarray(sample.tau_inc, float)
    n = r.size
    if n < 2:
        raise InsufficientSampleError(f"need at least 2 increments, got {n}")
    rb, tb = r.mean(), t.mean()
    v = rb / tb
    resid = r - v * t
    var = resid.var(ddof=1) / (n * tb * tb)
    return EstimateReport(float(v), float(math.sqrt(max(var, 0.0))), n, "regeneration-ratio")


def direct_speed(x_final, n_steps: int) -> EstimateReport:
    """Mean of ``X_N / N`` over independent replicas."""
    v = np.asarray(x_final, float) / n_steps
    if v.size < 2:
        raise InsufficientSampleError("need at least 2 replicas")
    return EstimateReport(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size), "direct-XN/N")


def tail_index_hill(sample, k: int | None = None) -> EstimateReport:
    """Hill estimator of the tail index from the ``k`` largest values.

    Defaults to ``k = floor(sqrt(n))``; SE is ``alpha / sqrt(k)``.
    """
    x = np.asarray(sample, float)
    n = x.size
    if k is None:
        k = int(math.isqrt(n))
    if k < 1 or n < 10 * k:
        raise InsufficientSampleError(f"Hill estimator needs n >= 10 k (n={n}, k={k})")
    if np.any(x <= 0):
        raise ValueError("Hill estimator needs positive data")
    top = np.sort(np.partition(x, n - k - 1)[n - k - 1:])
    gamma = float(np.mean(np.log(top[1:] / top[0])))
    alpha = 1.0 / gamma if gamma > 0 else math.inf
    return EstimateReport(alpha, alpha / math.sqrt(k), n, "hill", {"k": int(k)})


@dataclass(frozen=True)
class MomentCurve:
    kappa: float
    sizes: np.ndarray
    moments: np.ndarray

    def last_ratio(self) -> float:
        return float(self.moments[-1] / self.moments[-2])


def moment_diagnostic(sample, kappa: float, levels: int | None = None, start: int = 100) -> MomentCurve:
    """Running ``kappa``-th sample moments at geometrically spaced sample sizes."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    x = np.asarray(sample, float)
    n = x.size
    if n < 2:
        raise InsufficientSampleError("need at least 2 values")
    start = min(start, n)
    if levels is None:
        levels = max(2, int(np.floor(np.log10(n / start))) * 3 + 1)
    sizes = np.unique(np.geomspace(start, n, levels).astype(np.int64))
    csum = np.cumsum(x**kappa)
    return MomentCurve(float(kappa), sizes, csum[sizes - 1] / sizes)


@dataclass(frozen=True)
class FluctuationReport:
    r: float
    n: np.ndarray
    x_median: np.ndarray
    x_max: np.ndarray
    m_median: np.ndarray
    m_max: np.ndarray

    @property
    def decays(self) -> bool:
        return bool(np.all(np.diff(self.x_median) < 0))


def mz_fluctuation_check(x_at, m_at, n_levels, r: float, speed: float) -> FluctuationReport:
    """Scaled fluctuations ``|X_n - n v| / n^(1/r)`` and ``|M_n| / n^(1/r)``.

    ``x_at`` and ``m_at`` are (replicas, levels) arrays of positions and
    martingale values at the times ``n_levels``.
    """
    if not 1.0 < r < 2.0:
        raise ValueError("r must lie in (1, 2)")
    n = np.asarray(n_levels, float)
    scale = n ** (1.0 / r)
    fx = np.abs(np.asarray(x_at, float) - n * speed) / scale
    fm = np.abs(np.asarray(m_at, float)) / scale
    return FluctuationReport(r, n.astype(np.int64), np.median(fx, 0), fx.max(0), np.median(fm, 0), fm.max(0))


@dataclass(frozen=True)
class OvershootReport:
    k: np.ndarray
    tail: np.ndarray
    slope: float
    slope_se: float
    n_samples: int
    censored: int

    @property
    def geometric(self) -> bool:
        return self.slope + 3 * self.slope_se < 0


def overshoot_values(batch, n: int, cutoff: int = 30):
    """``rho_{nu(n)} - X_n`` where ``nu(n)`` is the first regeneration after time n.

    ``n`` must be one of the batch checkpoints. Returns the values and the
    number of replicas with no confirmed regeneration after n.
    """
    idx = np.flatnonzero(batch.checkpoints == n)
    if idx.size == 0:
        raise ValueError(f"{n} is not a checkpoint of the batch")
    out, missing = [], 0
    for rep in batch.good():
        tau, rho, _, _ = rep.regenerations(cutoff)
        after = np.flatnonzero(tau > n)
        if after.size == 0:
            missing += 1
            continue
        out.append(int(rho[after[0]] - rep.cp_x[idx[0]]))
    return np.asarray(out, np.int64), missing


def overshoot_tail_check(overshoots, k_max: int = 20, censored: int = 0) -> OvershootReport:
    """Empirical tail of the overshoot and its fitted log-slope over ``k = 1..k_max``."""
    o = np.asarray(overshoots)
    if o.size == 0:
        raise InsufficientSampleError("no overshoot values")
    if np.any(o < 0):
        raise ValueError("overshoot must be non-negative")
    k = np.arange(1, k_max + 1)
    tail = np.array([(o >= j).mean() for j in k])
    pos = tail > 0
    if pos.sum() < 3:
        return OvershootReport(k, tail, -math.inf, 0.0, int(o.size), censored)
    kk, lt = k[pos], np.log(tail[pos])
    # weighted fit: var(log tail) ~ (1 - P) / (n P)
    w = o.size * tail[pos] / np.maximum(1 - tail[pos], 1e-12)
    W = np.sum(w)
    kbar = np.sum(w * kk) / W
    sxx = np.sum(w * (kk - kbar) ** 2)
    slope = np.sum(w * (kk - kbar) * lt) / sxx
    return OvershootReport(k, tail, float(slope), float(math.sqrt(1.0 / sxx)), int(o.size), censored)


def critical_ratio(p: float, lam: float) -> float:
    """``lambda_c / lambda``, the tail index of regeneration times."""
    return compute_lambda_c(p) / lam
