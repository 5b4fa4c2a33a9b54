"""Simulation of the biased walk on a finite environment window."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from ..environment.config import LadderConfig
from ..environment.model import ModelParams, Vertex
from ..environment.sampling import as_generator
from .kernel import MOVE_DX, VERT, kernel_tables, pattern_array

EXIT_NONE, EXIT_LEFT, EXIT_RIGHT = 0, 1, 2
EXIT_NAMES = ("none", "left", "right")


@njit(cache=True)
def _walk(pat, cum, nu, k0, y0, n_steps, rng):
    n = pat.shape[0]
    moves = np.empty(n_steps, np.uint8)
    m = np.empty(n_steps + 1)
    m[0] = 0.0
    k, y = k0, y0
    for t in range(n_steps):
        c = pat[k, y]
        u = rng.random()
        mv = 0
        while u >= cum[c, mv]:
            mv += 1
        moves[t] = mv
        m[t + 1] = m[t] + nu[c, mv]
        if mv == 1:
            k += 1
        elif mv == 2:
            k -= 1
        elif mv == 3:
            y = 1 - y
        if k == n - 1:
            return moves[:t + 1], m[:t + 2], 2
        if k == 0:
            return moves[:t + 1], m[:t + 2], 1
    return moves, m, 0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A walk path stored as move codes (0 stay, 1 right, 2 left, 3 vertical).

    ``exit`` records whether the walk was stopped at a window edge.
    """

    params: ModelParams
    start: Vertex
    moves: np.ndarray
    m_path: np.ndarray
    seed: Optional[int] = None
    exit: str = "none"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return int(self.moves.size)

    @property
    def flagged(self) -> bool:
        return self.exit != "none"

    @property
    def x_path(self) -> np.ndarray:
        if "x" not in self._cache:
            x = np.empty(self.n_steps + 1, np.int64)
            x[0] = self.start.x
            np.cumsum(MOVE_DX[self.moves], out=x[1:])
            x[1:] += self.start.x
            self._cache["x"] = x
        return self._cache["x"]

    @property
    def y_path(self) -> np.ndarray:
        if "y" not in self._cache:
            y = np.empty(self.n_steps + 1, np.int64)
            y[0] = self.start.y
            flips = np.cumsum(self.moves == VERT) % 2
            y[1:] = self.start.y ^ flips
            self._cache["y"] = y
        return self._cache["y"]

    def vertices(self) -> list[Vertex]:
        return [Vertex(int(x), int(y)) for x, y in zip(self.x_path, self.y_path)]


def run_walk(config: LadderConfig, lam: float, start: Vertex, n_steps: int, rng) -> Trajectory:
    """Run ``n_steps`` steps of the biased walk from ``start``.

    The walk stops early, with ``exit`` set, when it reaches the first or last
    column of the window. ``rng`` is a Generator or an integer seed.

    Raises
    ------
    ValueError
        If ``start`` is not on the open cluster.
    """
    if not config.contains(start):
        raise ValueError(f"start {start} outside the window")
    if not config.in_cluster(start):
        raise ValueError(f"start {start} is not on the open cluster")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = as_generator(rng)
    tab = kernel_tables(lam)
    moves, m, code = _walk(
        pattern_array(config), tab.cum, tab.nu, start.x - config.x_min, start.y, int(n_steps), gen
    )
    p = config.p if config.p is not None else 0.5
    return Trajectory(ModelParams(p, float(lam)), start, moves, m, seed, EXIT_NAMES[code])


def path_patterns(trajectory: Trajectory, config: LadderConfig) -> np.ndarray:
    """Incident-edge pattern of ``Y_{n-1}`` for every step n."""
    pat = pattern_array(config)
    return pat[trajectory.x_path[:-1] - config.x_min, trajectory.y_path[:-1]]


def martingale_path(trajectory: Trajectory, config: Optional[LadderConfig] = None) -> np.ndarray:
    """Cumulative sums of ``nu`` along the path, starting at 0.

    Without a config the values recorded during simulation are returned.
    """
    if config is None:
        return trajectory.m_path
    tab = kernel_tables(trajectory.params.lam)
    inc = tab.nu[path_patterns(trajectory, config), trajectory.moves]
    out = np.zeros(trajectory.n_steps + 1)
    np.cumsum(inc, out=out[1:])
    return out


# export ----------------------------------------------------------------------

TRAJ_MAGIC = b"LADT"
TRAJ_HEADER = struct.Struct("<4sHHddqqqq")


def pack_moves(moves: np.ndarray) -> bytes:
    """Four 2-bit move codes per byte, first move in the lowest bits."""
    m = np.asarray(moves, np.uint8)
    pad = (-m.size) % 4
    m = np.concatenate([m, np.zeros(pad, np.uint8)]).reshape(-1, 4)
    return (m[:, 0] | m[:, 1] << 2 | m[:, 2] << 4 | m[:, 3] << 6).astype(np.uint8).tobytes()


def unpack_moves(data: bytes, n: int) -> np.ndarray:
    b = np.frombuffer(data, np.uint8)
    out = np.stack([b & 3, (b >> 2) & 3, (b >> 4) & 3, (b >> 6) & 3], axis=1).ravel()
    return out[:n].astype(np.uint8)


def save_trajectory(trajectory: Trajectory, path, overwrite: bool = False) -> Path:
    """Binary export: fixed header then packed move codes.

    Header ``<4sHHddqqqq``: magic ``LADT``, version 1, exit code, p, lambda,
    seed (-1 if unknown), start x, start y, number of moves.
    """
    t = trajectory
    head = TRAJ_HEADER.pack(
        TRAJ_MAGIC, 1, EXIT_NAMES.index(t.exit), t.params.p, t.params.lam,
        -1 if t.seed is None else int(t.seed), t.start.x, t.start.y, t.n_steps,
    )
    path = Path(path)
    with open(path, "wb" if overwrite else "xb") as fh:
        fh.write(head + pack_moves(t.moves))
    return path


def load_trajectory(path, config: Optional[LadderConfig] = None) -> Trajectory:
    """Read a binary trajectory; the martingale path is rebuilt when a config is given."""
    data = Path(path).read_bytes()
    magic, version, code, p, lam, seed, x0, y0, n = TRAJ_HEADER.unpack_from(data)
    if magic != TRAJ_MAGIC or version != 1:
        raise ValueError("not a trajectory file")
    moves = unpack_moves(data[TRAJ_HEADER.size:], n)
    traj = Trajectory(ModelParams(p, lam), Vertex(x0, y0), moves, np.full(n + 1, np.nan),
                      None if seed < 0 else int(seed), EXIT_NAMES[code])
    if config is not None:
        traj = Trajectory(traj.params, traj.start, moves, martingale_path(traj, config), traj.seed, traj.exit)
    return traj


def write_trajectory_csv(trajectory: Trajectory, path, overwrite: bool = False) -> Path:
    path = Path(path)
    with open(path, "w" if overwrite else "x", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "x", "y", "M"])
        for row in zip(range(trajectory.n_steps + 1), trajectory.x_path, trajectory.y_path, trajectory.m_path):
            w.writerow([row[0], int(row[1]), int(row[2]), repr(float(row[3]))])
    return path
