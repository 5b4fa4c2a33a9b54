"""Excursions into a single trap: the reflected segment chain on {0, ..., m}.

From 0 the chain steps to 1, from m it steps to m - 1, and inside it moves
right with probability e^lam / (e^lam + e^-lam).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import linalg
from scipy.special import gamma as gamma_fn

from ..environment.sampling import as_generator


def _check_lam(lam):
    if not lam > 0:
        raise ValueError(f"bias must be positive, got {lam}")


def _check_depth(m):
    if int(m) != m or m < 1:
        raise ValueError(f"trap depth must be a positive integer, got {m}")


@dataclass(frozen=True)
class TrapChainSpec:
    m: int
    lam: float

    def __post_init__(self):
        _check_depth(self.m)
        _check_lam(self.lam)

    @property
    def up(self) -> float:
        return 1.0 / (1.0 + math.exp(-2.0 * self.lam))


def expected_trap_return_time(lam: float, m: int) -> float:
    """Mean return time to the trap entrance, ``2 (e^{2 lam m} - 1) / (e^{2 lam} - 1)``."""
    _check_lam(lam)
    _check_depth(m)
    return 2.0 * math.expm1(2.0 * lam * m) / math.expm1(2.0 * lam)


def trap_return_time_exact(spec: TrapChainSpec) -> float:
    """Mean return time to 0 by first-step analysis (dense solve on m + 1 unknowns).

    Unknowns are ``h_j = E_j[time to hit 0]`` for j = 1..m; the answer is
    ``1 + h_1``.
    """
    m, q = spec.m, spec.up
    if m == 1:
        return 2.0
    A = np.eye(m)
    b = np.ones(m)
    for j in range(1, m + 1):
        r = j - 1
        if j == m:
            A[r, r - 1] -= 1.0
        else:
            A[r, r + 1] -= q
            if j > 1:
                A[r, r - 1] -= 1.0 - q
    lu = linalg.lu_factor(A)
    h = linalg.lu_solve(lu, b)
    # one round of iterative refinement with the residual in extended precision
    resid = b.astype(np.longdouble) - A.astype(np.longdouble) @ h.astype(np.longdouble)
    h = h + linalg.lu_solve(lu, resid.astype(float))
    if not np.all(np.isfinite(h)):
        raise RuntimeError("singular first-step system")
    return float(1.0 + h[0])


def moment_bounds(lam: float, m: int, kappa: float) -> tuple[float, float]:
    """Lower and upper bounds on ``E_0[tau_m^kappa]`` for ``kappa >= 1``."""
    _check_lam(lam)
    _check_depth(m)
    if kappa < 1:
        raise ValueError("the moment bounds need kappa >= 1")
    lower = 2.0**kappa * math.exp(2 * kappa * lam * (m - 1))
    ratio = (math.exp(2 * lam) + 1) / math.expm1(2 * lam)
    c = 2.0 ** (kappa - 1) * (1 + 2 * (2 * (kappa / math.e) ** kappa + gamma_fn(kappa + 1)) * ratio**kappa)
    upper = c * m**kappa * math.exp(2 * kappa * lam * m)
    return lower, upper


@njit(cache=True)
def _excursions(m, up, n, rng):
    out = np.empty(n, np.int64)
    for r in range(n):
        pos = 1
        t = 1
        while pos != 0:
            if pos == m:
                pos -= 1
            elif rng.random() < up:
                pos += 1
            else:
                pos -= 1
            t += 1
        out[r] = t
    return out


def simulate_trap_excursions(spec: TrapChainSpec, n: int, rng) -> np.ndarray:
    """``n`` independent return times to 0 of the segment chain started at 0."""
    return _excursions(spec.m, spec.up, int(n), as_generator(rng))


def ruin_probability(lam: float, m: int, i: int) -> float:
    """``r_i``: probability that the segment chain started at i returns to i before hitting 0."""
    _check_lam(lam)
    _check_depth(m)
    if not 1 <= i <= m:
        raise ValueError(f"need 1 <= i <= m, got i={i}, m={m}")
    e2 = math.exp(2 * lam)
    tail = math.expm1(2 * lam) / (-math.expm1(-2 * lam * i)) * math.exp(-2 * lam * i)
    if i == m:
        return 1.0 - tail
    up = e2 / (1.0 + e2)
    return up + (1.0 - up) * (1.0 - tail)


@njit(cache=True)
def _ruin(m, up, i, n, rng):
    hits = 0
    for _ in range(n):
        pos = i
        while True:
            if pos == m:
                pos -= 1
            elif rng.random() < up:
                pos += 1
            else:
                pos -= 1
            if pos == i:
                hits += 1
                break
            if pos == 0:
                break
    return hits


def simulate_ruin(lam: float, m: int, i: int, n: int, rng) -> float:
    spec = TrapChainSpec(m, lam)
    return _ruin(m, spec.up, int(i), int(n), as_generator(rng)) / n


def escape_probability_bound(lam: float) -> float:
    """Uniform lower bound on never returning to a forwards-communicating start."""
    _check_lam(lam)
    return -math.expm1(-lam) / (math.exp(lam) + 1.0 + math.exp(-lam))


class BoundViolation(AssertionError):
    pass


def geometric_moment_sum(r: float, kappa: float) -> float:
    """``sum_{k>=1} k^kappa r^k`` summed until the terms are negligible."""
    if not 0 < r < 1 or kappa <= 0:
        raise ValueError("need 0 < r < 1 and kappa > 0")
    L = -math.log(r)
    peak = kappa / L
    # beyond the peak the terms decay at least like r^k; stop at 1e-17 relative mass
    k_max = int(peak + (kappa * math.log(max(peak, 1.0)) + 60.0) / L) + 10
    k = np.arange(1, k_max + 1, dtype=float)
    logs = kappa * np.log(k) + k * math.log(r)
    top = logs.max()
    return float(math.exp(top) * math.fsum(np.exp(logs - top)))


def geometric_moment_bound(r: float, kappa: float, check: bool = True) -> float:
    """Upper bound ``|log r|^-kappa (2 (kappa/e)^kappa + Gamma(kappa+1) / |log r|)``.

    With ``check`` the bound is compared with the directly summed series and
    ``BoundViolation`` is raised if it fails.
    """
    if not 0 < r < 1 or kappa <= 0:
        raise ValueError("need 0 < r < 1 and kappa > 0")
    L = abs(math.log(r))
    bound = (2 * (kappa / math.e) ** kappa + gamma_fn(kappa + 1) / L) / L**kappa
    if check:
        exact = geometric_moment_sum(r, kappa)
        if exact > bound * (1 + 1e-12):
            raise BoundViolation(f"sum {exact} exceeds bound {bound} at r={r}, kappa={kappa}")
    return float(bound)
