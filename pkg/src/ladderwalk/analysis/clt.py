"""Covariance of (position fluctuation, martingale) and the derivative of the speed."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..regeneration.estimates import EstimateReport, InsufficientSampleError

MIN_REPLICAS = 1000


@dataclass(frozen=True)
class CovarianceEstimate:
    """Entries of ``Sigma`` estimated as n^-1 sample moments at horizon ``n``."""

    sigma11: float
    sigma22: float
    sigma12: float
    se11: float
    se22: float
    se12: float
    n: int
    replicas: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.sigma11, self.sigma12], [self.sigma12, self.sigma22]])

    def cauchy_schwarz_ok(self) -> bool:
        slack = 3 * math.sqrt(self.se12**2 + 0.25 * (self.se11**2 + self.se22**2))
        return abs(self.sigma12) <= math.sqrt(max(self.sigma11 * self.sigma22, 0.0)) + slack


@dataclass(frozen=True)
class NormalityReport:
    ks_x: float
    ks_m: float
    p_x: float
    p_m: float
    increment_corr_x: float
    increment_p_x: float
    increment_corr_m: float
    increment_p_m: float

    def passes(self, level: float = 0.01) -> bool:
        return min(self.p_x, self.p_m, self.increment_p_x, self.increment_p_m) > level


def _mean_se(v):
    v = np.asarray(v, float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def covariance_estimate(x_n, m_n, n: int, speed: float) -> CovarianceEstimate:
    b = np.asarray(x_n, float) - n * speed
    m = np.asarray(m_n, float)
    if b.size < MIN_REPLICAS:
        raise InsufficientSampleError(f"need at least {MIN_REPLICAS} replicas, got {b.size}")
    s11, e11 = _mean_se(b * b / n)
    s22, e22 = _mean_se(m * m / n)
    s12, e12 = _mean_se(b * m / n)
    return CovarianceEstimate(s11, s22, s12, e11, e22, e12, int(n), int(b.size))


def _ks_standard(z):
    z = (z - z.mean()) / z.std(ddof=1)
    res = stats.kstest(z, "norm")
    return float(res.statistic), float(res.pvalue)


def clt_suite(x_half, x_full, m_half, m_full, n: int, lam: float, speed: float):
    """Covariance estimate at horizon n and normality checks.

    ``x_half``/``m_half`` are positions and martingale values at time n/2.
    The KS tests use standardised marginals at time n; the increment check
    tests for correlation between the first and second half.

    Returns
    -------
    (CovarianceEstimate, NormalityReport)
    """
    cov = covariance_estimate(x_full, m_full, n, speed)
    xf = np.asarray(x_full, float) - n * speed
    xh = np.asarray(x_half, float) - 0.5 * n * speed
    mf = np.asarray(m_full, float)
    mh = np.asarray(m_half, float)
    ksx, px = _ks_standard(xf)
    ksm, pm = _ks_standard(mf)
    cx = stats.pearsonr(xh, xf - xh)
    cm = stats.pearsonr(mh, mf - mh)
    rep = NormalityReport(ksx, ksm, px, pm, float(cx.statistic), float(cx.pvalue),
                          float(cm.statistic), float(cm.pvalue))
    return cov, rep


@dataclass(frozen=True)
class VarianceGrowth:
    n: np.ndarray
    scaled_var: np.ndarray
    se: np.ndarray

    @property
    def diverges(self) -> bool:
        """Each level exceeds the previous by more than 3 combined SE."""
        d = np.diff(self.scaled_var)
        s = np.sqrt(self.se[1:] ** 2 + self.se[:-1] ** 2)
        return bool(np.all(d > 3 * s))

    @property
    def stable(self) -> bool:
        d = np.abs(np.diff(self.scaled_var))
        s = np.sqrt(self.se[1:] ** 2 + self.se[:-1] ** 2)
        return bool(np.all(d < 3 * s))


def variance_growth(samples, n_levels) -> VarianceGrowth:
    """``Var(X_n) / n`` per level; ``samples[j]`` holds independent X_n at ``n_levels[j]``.

    The SE uses the fourth-moment formula for the sample variance.
    """
    out, se = [], []
    for x, n in zip(samples, n_levels):
        x = np.asarray(x, float)
        c = x - x.mean()
        v = c.var(ddof=1)
        m4 = np.mean(c**4)
        out.append(v / n)
        se.append(math.sqrt(max(m4 - v * v, 0.0) / x.size) / n)
    return VarianceGrowth(np.asarray(n_levels), np.array(out), np.array(se))


def derivative_via_covariance(x_n, m_n, n: int, speed: float) -> EstimateReport:
    """``sigma12 = n^-1 E[(X_n - n v) M_n]`` with its standard error."""
    b = np.asarray(x_n, float) - n * speed
    m = np.asarray(m_n, float)
    if b.size < MIN_REPLICAS:
        raise InsufficientSampleError(f"need at least {MIN_REPLICAS} replicas, got {b.size}")
    est, se = _mean_se(b * m / n)
    return EstimateReport(est, se, int(b.size), "covariance", {"n": int(n), "speed": float(speed)})


def derivative_importance_sampled(x_n, log_ratio, n: int, speed: float, delta: float) -> EstimateReport:
    """``E[(X_n - n v) exp(log_ratio)] / (delta n)`` with the density ratio to bias ``lam* + delta``."""
    b = np.asarray(x_n, float) - n * speed
    w = np.exp(np.asarray(log_ratio, float))
    if b.size < MIN_REPLICAS:
        raise InsufficientSampleError(f"need at least {MIN_REPLICAS} replicas, got {b.size}")
    est, se = _mean_se(b * w / (delta * n))
    return EstimateReport(est, se, int(b.size), "importance-sampled",
                          {"n": int(n), "delta": float(delta), "mean_weight": float(w.mean())})


def finite_difference(v_plus: EstimateReport, v_minus: EstimateReport, h: float) -> EstimateReport:
    est = (v_plus.estimate - v_minus.estimate) / (2 * h)
    se = math.hypot(v_plus.se, v_minus.se) / (2 * h)
    return EstimateReport(est, se, min(v_plus.n, v_minus.n), "central-difference", {"h": h})


def richardson(fd_h: EstimateReport, fd_half: EstimateReport) -> EstimateReport:
    """Combine central differences at h and h/2 to cancel the h^2 bias."""
    est = (4 * fd_half.estimate - fd_h.estimate) / 3
    se = math.hypot(4 * fd_half.se, fd_h.se) / 3
    return EstimateReport(est, se, min(fd_h.n, fd_half.n), "richardson")


@dataclass(frozen=True)
class TaylorLimitReport:
    n: np.ndarray
    delta: np.ndarray
    scaled_a: np.ndarray
    scaled_a_se: np.ndarray
    remainder_ratio: np.ndarray
    target: float
    target_se: float

    def converged(self) -> bool:
        return abs(self.scaled_a[-1] - self.target) <= 3 * math.hypot(self.scaled_a_se[-1], self.target_se)


def taylor_A_limit(a_at, lr_at, m_at, n_levels, deltas, target: float = 0.0, target_se: float = 0.0):
    """``delta_j^2 A(n_j)`` along a schedule, plus the remainder size ``|R| / (delta^2 n)``.

    ``a_at`` and ``m_at`` are (replicas, levels); ``lr_at`` is (replicas,
    levels) holding the exact log density ratio at ``lam* + deltas[j]`` for
    level j.
    """
    a = np.asarray(a_at, float)
    lr = np.asarray(lr_at, float)
    m = np.asarray(m_at, float)
    n = np.asarray(n_levels, float)
    d = np.asarray(deltas, float)
    sa = d**2 * a
    rem = lr - d * m + d**2 * a
    ratio = np.abs(rem).mean(0) / (d**2 * n)
    return TaylorLimitReport(n.astype(np.int64), d, sa.mean(0), sa.std(0, ddof=1) / math.sqrt(a.shape[0]),
                             ratio, float(target), float(target_se))
