"""Time spent by the walk inside individual traps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment.config import LadderConfig
from ..regeneration.estimates import moment_diagnostic
from ..walker.walk import Trajectory


def trap_sojourn_times(trajectory: Trajectory, config: LadderConfig, traps=None) -> np.ndarray:
    """Number of steps started from a dead-end vertex of each trap piece.

    Traps never entered contribute 0.
    """
    traps = config.traps if traps is None else traps
    x = trajectory.x_path[:-1]
    y = trajectory.y_path[:-1]
    out = np.zeros(len(traps), np.int64)
    for j, tp in enumerate(traps):
        inside = (x > tp.a) & (x <= tp.b) & (y == 1 - tp.exit_level)
        out[j] = int(inside.sum())
    return out


@dataclass(frozen=True)
class SojournReport:
    kappa: float
    sizes: np.ndarray
    moments: np.ndarray

    def growth(self) -> float:
        """Ratio of the last running moment to the one a decade earlier (or the first)."""
        target = self.sizes[-1] / 10
        j = int(np.searchsorted(self.sizes, target))
        j = min(j, self.sizes.size - 2)
        return float(self.moments[-1] / self.moments[j]) if self.moments[j] > 0 else np.inf


def trap_sojourn_moments(sojourns, kappa: float, levels: int = 7, start: int = 100) -> SojournReport:
    """Running ``kappa``-th moments of per-trap sojourn times."""
    curve = moment_diagnostic(np.asarray(sojourns, float), kappa, levels=levels, start=start)
    return SojournReport(kappa, curve.sizes, curve.moments)
