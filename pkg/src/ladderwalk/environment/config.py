"""Finite windows of the ladder environment and their annotations."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .model import H0, H1, LEVEL0, LEVEL1, V, SLAB_UPDATE_TABLE, Slab, Vertex

_LEVEL_BITS = (LEVEL0, LEVEL1)
_H_BITS = (H0, H1)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrapPiece:
    """A trap piece ``[a, b)`` with its single exit on level ``exit_level``.

    The dead end is the line segment ``(a+1, 1-i), ..., (b, 1-i)`` hanging off
    the entrance ``(a, 1-i)``.
    """

    a: int
    b: int
    exit_level: int

    def __post_init__(self):
        if self.b - self.a < 1:
            raise ValueError(f"trap length must be >= 1, got {self.b - self.a}")

    @property
    def length(self) -> int:
        return self.b - self.a

    @property
    def entrance(self) -> Vertex:
        return Vertex(self.a, 1 - self.exit_level)

    @property
    def end(self) -> Vertex:
        return Vertex(self.b + 1, self.exit_level)

    def dead_end_vertices(self) -> list[Vertex]:
        return [Vertex(x, 1 - self.exit_level) for x in range(self.a + 1, self.b + 1)]


@dataclass(frozen=True, eq=False)
class LadderConfig:
    """Environment on the columns ``x_min..x_max`` of the ladder.

    Parameters
    ----------
    x_min, x_max : int
        Window bounds, ``x_min < x_max``.
    slabs : (x_max - x_min,) uint8
        Slab codes for columns ``x_min+1..x_max``. The vertical edge at
        ``x_min`` lies outside the window and is treated as closed.
    t_states : (x_max - x_min + 1,) int8
        Backwards-communication codes for columns ``x_min..x_max``.
        ``t_states[0]`` is the boundary state supplied by the sampler.
    p, seed, sampler :
        Provenance only.
    boundary_pre_regen : bool
        The boundary column is known to be a pre-regeneration point (its top
        vertex has no edges to the left), as for cycle-stationary windows.

    Annotation fields (``cluster``, ``forwards``, ``pre_regen``, ``traps``)
    are filled by :func:`annotate`.
    """

    x_min: int
    x_max: int
    slabs: np.ndarray
    t_states: np.ndarray
    p: Optional[float] = None
    seed: Optional[int] = None
    sampler: str = "manual"
    boundary_pre_regen: bool = False
    forwards: Optional[np.ndarray] = None
    cluster: Optional[np.ndarray] = None
    pre_regen: Optional[np.ndarray] = None
    traps: Optional[tuple] = None

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ConfigError(f"empty window [{self.x_min}, {self.x_max}]")
        n = self.x_max - self.x_min
        if self.slabs.shape != (n,) or self.t_states.shape != (n + 1,):
            raise ConfigError("slab/t-state arrays do not match the window")

    # geometry -------------------------------------------------------------
    @property
    def n_columns(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def annotated(self) -> bool:
        return self.cluster is not None

    def slab_at(self) -> np.ndarray:
        """Slab codes indexed by column offset, with a closed dummy at offset 0."""
        out = np.zeros(self.n_columns, np.uint8)
        out[1:] = self.slabs
        return out

    def contains(self, v: Vertex) -> bool:
        return self.x_min <= v.x <= self.x_max

    def _col(self, x: int) -> int:
        if not self.x_min <= x <= self.x_max:
            raise IndexError(f"column {x} outside window [{self.x_min}, {self.x_max}]")
        return x - self.x_min

    def slab(self, x: int) -> Slab:
        k = self._col(x)
        if k == 0:
            raise IndexError("the boundary column has no slab in the window")
        return Slab.from_code(self.slabs[k - 1])

    def t_state(self, x: int) -> int:
        return int(self.t_states[self._col(x)])

    def is_open(self, u: Vertex, w: Vertex) -> bool:
        """Whether the edge between two neighbouring vertices is open."""
        if u.x == w.x and u.y != w.y:
            k = self._col(u.x)
            return k > 0 and bool(self.slabs[k - 1] & V)
        if u.y == w.y and abs(u.x - w.x) == 1:
            k = self._col(max(u.x, w.x))
            self._col(min(u.x, w.x))
            return bool(self.slabs[k - 1] & _H_BITS[u.y])
        return False

    def edge_arrays(self):
        """Open-edge masks by column offset: ``right (n, 2)`` and ``vert (n,)``.

        ``right[k, y]`` is the edge from ``(x_min+k, y)`` to ``(x_min+k+1, y)``;
        it is False in the last column.
        """
        s = self.slab_at()
        right = np.zeros((self.n_columns, 2), bool)
        right[:-1, 0] = (s[1:] & H0) != 0
        right[:-1, 1] = (s[1:] & H1) != 0
        vert = (s & V) != 0
        return right, vert

    # annotations ----------------------------------------------------------
    def _need(self):
        if not self.annotated:
            raise ConfigError("configuration is not annotated; call annotate() first")

    def backwards(self) -> np.ndarray:
        t = self.t_states
        return np.stack([(t & LEVEL0) != 0, (t & LEVEL1) != 0], axis=1)

    @property
    def backbone(self) -> np.ndarray:
        """Backbone mask (n_columns, 2): the forwards-communicating vertices."""
        self._need()
        return self.forwards

    @property
    def dead_ends(self) -> np.ndarray:
        self._need()
        return self.cluster & ~self.forwards

    def in_cluster(self, v: Vertex) -> bool:
        self._need()
        return bool(self.cluster[self._col(v.x), v.y])

    def on_backbone(self, v: Vertex) -> bool:
        self._need()
        return bool(self.forwards[self._col(v.x), v.y])

    def pre_regeneration_points(self) -> np.ndarray:
        """x-coordinates of pre-regeneration points (bottom vertices)."""
        self._need()
        return np.flatnonzero(self.pre_regen) + self.x_min

    def trap_columns(self) -> np.ndarray:
        """Boolean mask over column offsets: column lies in ``[a, b)`` of some trap piece."""
        self._need()
        mask = np.zeros(self.n_columns, bool)
        for tp in self.traps:
            mask[tp.a - self.x_min:tp.b - self.x_min] = True
        return mask


def annotate(config: LadderConfig) -> LadderConfig:
    """Return a copy with cluster, backbone, pre-regeneration and trap annotations.

    Cluster membership is backwards or forwards communication inside the
    window; the right edge uses the convention documented in the forwards
    kernel, so annotations within a few columns of ``x_max`` are provisional.
    """
    s = config.slab_at()
    t = np.ascontiguousarray(config.t_states, dtype=np.int8)
    fc = K.forwards(s, t)
    bc = config.backwards()
    cluster = bc | fc
    pre = K.pre_regeneration(s, t)
    if config.boundary_pre_regen:
        if not (t[0] & LEVEL0) or s[1] & H1:
            raise ConfigError("boundary column cannot be a pre-regeneration point")
        pre[0] = True
    rows = K.find_traps(s, cluster)
    traps = tuple(TrapPiece(int(a) + config.x_min, int(b) + config.x_min, int(i)) for a, b, i in rows)
    for arr in (fc, cluster, pre):
        arr.setflags(write=False)
    return dataclasses.replace(config, forwards=fc, cluster=cluster, pre_regen=pre, traps=traps)


def from_slabs(slabs, x_min: int = 0, boundary_state: int = 3, **provenance) -> LadderConfig:
    """Build and annotate a config from slab codes of columns ``x_min+1..``.

    Raises
    ------
    ConfigError
        If backwards communication dies out (some column reaches state 00).
    """
    slabs = np.asarray(slabs, dtype=np.uint8)
    if slabs.ndim != 1 or slabs.size == 0 or np.any(slabs > 7):
        raise ConfigError("slabs must be a non-empty 1-d array of codes 0..7")
    if boundary_state not in (1, 2, 3):
        raise ConfigError(f"boundary state must be 01, 10 or 11, got code {boundary_state}")
    s = np.concatenate([[0], slabs]).astype(np.uint8)
    t = K.propagate(np.int8(boundary_state), s)
    if np.any(t == 0):
        bad = int(np.argmax(t == 0)) + x_min
        raise ConfigError(f"no backwards-communicating vertex at column {bad}")
    slabs.setflags(write=False)
    t.setflags(write=False)
    cfg = LadderConfig(x_min, x_min + slabs.size, slabs, t, **provenance)
    return annotate(cfg)


def fully_open(n_columns: int, x_min: int = 0) -> LadderConfig:
    return from_slabs(np.full(n_columns, H0 | H1 | V, np.uint8), x_min=x_min)


def check_invariants(config: LadderConfig) -> None:
    """Raise ConfigError if any structural invariant fails."""
    t = config.t_states
    if np.any(t == 0) or np.any(t > 3):
        raise ConfigError("t-states must lie in {01, 10, 11}")
    expected = SLAB_UPDATE_TABLE[t[:-1], config.slabs]
    if np.any(expected != t[1:]):
        k = int(np.argmax(expected != t[1:])) + 1
        raise ConfigError(f"t-state at column {config.x_min + k} breaks compatibility")
    if not config.annotated:
        return
    s = config.slab_at()
    for k in np.flatnonzero(config.pre_regen):
        if s[k] & (V | H1) or s[k + 1] & H1 or not t[k] & LEVEL0:
            raise ConfigError(f"pre-regeneration point at {config.x_min + k} is not isolated")
    last = None
    for tp in config.traps:
        a, b = tp.a - config.x_min, tp.b - config.x_min
        if last is not None and a < last:
            raise ConfigError("trap pieces overlap")
        last = b
        if not s[a] & V or np.any(s[a + 1:b + 1] != K.TRAP_BODY):
            raise ConfigError(f"trap piece [{tp.a}, {tp.b}) violates the body pattern")
        exit_bits = s[b + 1] & (H0 | H1)
        if exit_bits != _H_BITS[tp.exit_level]:
            raise ConfigError(f"trap piece [{tp.a}, {tp.b}) has no single exit")
