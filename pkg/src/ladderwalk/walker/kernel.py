"""Transition kernel of the biased walk and its derivatives in the bias.

A vertex is summarised by its incident-edge pattern, an integer in 0..7
with bit 0 = right edge open, bit 1 = left edge open, bit 2 = vertical open.
Moves are coded 0 stay, 1 right, 2 left, 3 vertical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..environment.config import LadderConfig
from ..environment.model import Vertex

STAY, RIGHT, LEFT, VERT = 0, 1, 2, 3
MOVE_DX = np.array([0, 1, -1, 0], dtype=np.int64)
MOVE_DY = np.array([0, 0, 0, 1], dtype=np.int64)  # vertical flips the level
PAT_RIGHT, PAT_LEFT, PAT_VERT = 1, 2, 4
_MOVE_BIT = {RIGHT: PAT_RIGHT, LEFT: PAT_LEFT, VERT: PAT_VERT}


def normaliser(lam: float):
    """``Z, Z', Z''`` for ``Z = e^lam + 1 + e^-lam``."""
    e, ei = math.exp(lam), math.exp(-lam)
    return e + 1.0 + ei, e - ei, e + ei


@dataclass(frozen=True, eq=False)
class KernelTables:
    """Per-pattern transition data at bias ``lam``; arrays are indexed ``[pattern, move]``.

    ``prob`` are transition probabilities, ``nu`` the derivative of ``log p``,
    ``d2`` the ratio ``p''/p``, ``log_p`` the log-probabilities (``-inf`` when
    the move is impossible). Entries for impossible moves are 0 in ``nu``/``d2``.
    """

    lam: float
    prob: np.ndarray
    cum: np.ndarray
    nu: np.ndarray
    d2: np.ndarray
    log_p: np.ndarray

    @property
    def c_lambda(self) -> float:
        return float(np.max(np.abs(self.nu[self.prob > 0])))


@lru_cache(maxsize=256)
def kernel_tables(lam: float) -> KernelTables:
    lam = float(lam)
    Z, Z1, Z2 = normaliser(lam)
    weights = np.array([0.0, math.exp(lam), math.exp(-lam), 1.0])
    dweights = MOVE_DX * weights  # d/dlam of e^{lam dx}
    ddweights = MOVE_DX**2 * weights
    nu_move = MOVE_DX - Z1 / Z
    d2_move = nu_move**2 - Z2 / Z + (Z1 / Z) ** 2

    prob = np.zeros((8, 4))
    nu = np.zeros((8, 4))
    d2 = np.zeros((8, 4))
    for pat in range(8):
        S = S1 = S2 = 0.0
        for mv, bit in _MOVE_BIT.items():
            if pat & bit:
                prob[pat, mv] = weights[mv] / Z
                nu[pat, mv] = nu_move[mv]
                d2[pat, mv] = d2_move[mv]
                S += weights[mv]
                S1 += dweights[mv]
                S2 += ddweights[mv]
        # residual construction keeps each row summing to one
        stay = 1.0 - prob[pat, 1:].sum()
        prob[pat, STAY] = stay
        if stay > 1e-15:
            g1 = (S1 * Z - S * Z1) / Z**2
            g2 = (S2 * Z - S * Z2) / Z**2 - 2.0 * Z1 * (S1 * Z - S * Z1) / Z**3
            nu[pat, STAY] = -g1 / stay
            d2[pat, STAY] = -g2 / stay
        else:
            prob[pat, STAY] = 0.0
    with np.errstate(divide="ignore"):
        log_p = np.log(prob)
    cum = np.cumsum(prob, axis=1)
    cum[:, -1] = 1.0
    for arr in (prob, cum, nu, d2, log_p):
        arr.setflags(write=False)
    return KernelTables(lam, prob, cum, nu, d2, log_p)


def c_lambda(lam: float) -> float:
    """Largest martingale increment over all incident-edge patterns."""
    return kernel_tables(lam).c_lambda


def pattern_array(config: LadderConfig) -> np.ndarray:
    """Incident-edge pattern of every window vertex, shape (n_columns, 2).

    Edges leaving the window are treated as closed.
    """
    right, vert = config.edge_arrays()
    left = np.zeros_like(right)
    left[1:] = right[:-1]
    pat = right.astype(np.int8) * PAT_RIGHT + left.astype(np.int8) * PAT_LEFT
    pat += (vert.astype(np.int8) * PAT_VERT)[:, None]
    return pat


def vertex_pattern(config: LadderConfig, v: Vertex) -> int:
    if not config.contains(v):
        raise IndexError(f"{v} lies outside the window [{config.x_min}, {config.x_max}]")
    return int(pattern_array(config)[v.x - config.x_min, v.y])


def move_between(v: Vertex, w: Vertex) -> int:
    if v == w:
        return STAY
    if v.y == w.y and w.x - v.x == 1:
        return RIGHT
    if v.y == w.y and w.x - v.x == -1:
        return LEFT
    if v.x == w.x:
        return VERT
    raise ValueError(f"{v} and {w} are not neighbours")


def target(v: Vertex, move: int) -> Vertex:
    if move == VERT:
        return Vertex(v.x, 1 - v.y)
    return Vertex(v.x + int(MOVE_DX[move]), v.y)


@dataclass(frozen=True)
class StepDistribution:
    """Law of one step from ``source``: ``targets[k]`` has probability ``probs[k]``.

    The self-loop is always listed first.
    """

    source: Vertex
    lam: float
    Z: float
    targets: tuple
    probs: tuple

    def as_dict(self) -> dict:
        return dict(zip(self.targets, self.probs))


def step_distribution(config: LadderConfig, lam: float, v: Vertex) -> StepDistribution:
    pat = vertex_pattern(config, v)
    tab = kernel_tables(lam)
    targets, probs = [v], [float(tab.prob[pat, STAY])]
    for mv in (RIGHT, LEFT, VERT):
        if tab.prob[pat, mv] > 0:
            targets.append(target(v, mv))
            probs.append(float(tab.prob[pat, mv]))
    return StepDistribution(v, float(lam), normaliser(lam)[0], tuple(targets), tuple(probs))


def _lookup(config, lam, v, w):
    pat = vertex_pattern(config, v)
    mv = move_between(v, w)
    tab = kernel_tables(lam)
    if tab.prob[pat, mv] <= 0.0:
        raise ValueError(f"transition {v} -> {w} has zero probability")
    return tab, pat, mv


def nu(config: LadderConfig, lam: float, v: Vertex, w: Vertex) -> float:
    """Derivative in the bias of ``log p(v, w)``."""
    tab, pat, mv = _lookup(config, lam, v, w)
    return float(tab.nu[pat, mv])


def second_log_terms(config: LadderConfig, lam: float, v: Vertex, w: Vertex):
    """Return ``(p''/p, nu**2)`` for the transition ``v -> w``."""
    tab, pat, mv = _lookup(config, lam, v, w)
    return float(tab.d2[pat, mv]), float(tab.nu[pat, mv]) ** 2
