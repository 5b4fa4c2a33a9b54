"""Agile and backbone views of a trajectory and the backbone/trap time split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environment.config import LadderConfig
from .walk import Trajectory


@dataclass(frozen=True)
class Projections:
    """Vertex sequences as (k, 2) arrays of (x, y) and the time split.

    ``time_backbone + time_traps`` equals the number of steps.
    """

    agile: np.ndarray
    backbone_walk: np.ndarray
    time_backbone: int
    time_traps: int


def agile_and_backbone_projections(trajectory: Trajectory, config: LadderConfig) -> Projections:
    xy = np.stack([trajectory.x_path, trajectory.y_path], axis=1)
    moved = np.concatenate([[True], trajectory.moves != 0])
    agile = xy[moved]
    on_b = config.backbone[agile[:, 0] - config.x_min, agile[:, 1]]
    keep = on_b[:-1] & on_b[1:]
    backbone_walk = np.concatenate([agile[:1], agile[1:][keep]])
    visits = config.backbone[xy[:-1, 0] - config.x_min, xy[:-1, 1]]
    t_b = int(visits.sum())
    return Projections(agile, backbone_walk, t_b, trajectory.n_steps - t_b)
