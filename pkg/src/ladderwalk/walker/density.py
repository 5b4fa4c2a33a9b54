"""Radon-Nikodym density between walk laws at two biases, with its Taylor split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment.config import LadderConfig
from .kernel import kernel_tables
from .walk import Trajectory, path_patterns


@dataclass(frozen=True)
class DensityRatio:
    """``log_ratio = (lam - lam*) M - (lam - lam*)**2 A + R``.

    ``linear`` is ``(lam - lam*) M_n`` under the reference bias, ``quadratic``
    is ``A(n) = 1/2 sum (nu**2 - p''/p)`` and ``remainder`` is ``R``, the
    part of the exact log-ratio beyond second order.
    """

    lambda_star: float
    lam: float
    log_ratio: float
    linear: float
    quadratic: float
    remainder: float

    @property
    def taylor_terms(self):
        return self.linear, self.quadratic, self.remainder

    def reconstruct(self) -> float:
        d = self.lam - self.lambda_star
        return self.linear - d * d * self.quadratic + self.remainder


def step_terms(patterns: np.ndarray, moves: np.ndarray, lambda_star: float, lam: float):
    """Per-step ``log p_lam - log p_lam*``, ``nu`` and ``nu**2 - p''/p`` at the reference bias."""
    ref = kernel_tables(lambda_star)
    alt = kernel_tables(lam)
    lr = alt.log_p[patterns, moves] - ref.log_p[patterns, moves]
    nu = ref.nu[patterns, moves]
    a = nu**2 - ref.d2[patterns, moves]
    return lr, nu, a


def density_ratio(config: LadderConfig, trajectory: Trajectory, lambda_star: float, lam: float) -> DensityRatio:
    """Density of the path law at ``lam`` relative to ``lambda_star`` (the simulation bias)."""
    if lambda_star == lam:
        return DensityRatio(lambda_star, lam, 0.0, 0.0, 0.0, 0.0)
    lr, nu, a = step_terms(path_patterns(trajectory, config), trajectory.moves, lambda_star, lam)
    d = lam - lambda_star
    log_ratio = float(lr.sum())
    linear = d * float(nu.sum())
    quad = 0.5 * float(a.sum())
    return DensityRatio(lambda_star, lam, log_ratio, linear, quad, log_ratio - linear + d * d * quad)
