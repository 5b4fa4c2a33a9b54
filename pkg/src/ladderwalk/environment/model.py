"""Encodings and closed-form quantities of the conditioned ladder percolation model.

Slab encoding (one integer in 0..7, fixed bit order):

    bit 0  h0  horizontal edge <(i-1, 0), (i, 0)>
    bit 1  h1  horizontal edge <(i-1, 1), (i, 1)>
    bit 2  v   vertical edge   <(i, 0), (i, 1)>

T-state encoding: the two-character code ``ab`` is read as a binary number,
``a`` for level 0 and ``b`` for level 1, so ``"10"`` (only the bottom vertex
backwards communicating) is 2 and ``"11"`` is 3. The value 0 (``"00"``) never
occurs in a conditioned configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

H0 = 1
H1 = 2
V = 4

LEVEL0 = 0b10
LEVEL1 = 0b01

T_NAMES = ("00", "01", "10", "11")
# conditioned state space, in this order everywhere (P_cond rows, pi, ...)
COND_STATES = (1, 2, 3)


@dataclass(frozen=True)
class Vertex:
    x: int
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"level must be 0 or 1, got {self.y}")


@dataclass(frozen=True)
class Slab:
    """The three edges a column adds: (h0, h1, v)."""

    h0: bool
    h1: bool
    v: bool

    @property
    def code(self) -> int:
        return int(self.h0) * H0 + int(self.h1) * H1 + int(self.v) * V

    @classmethod
    def from_code(cls, code: int) -> "Slab":
        code = int(code)
        if not 0 <= code < 8:
            raise ValueError(f"slab code out of range: {code}")
        return cls(bool(code & H0), bool(code & H1), bool(code & V))

    @property
    def n_open(self) -> int:
        return int(self.h0) + int(self.h1) + int(self.v)


def t_code(name: str) -> int:
    if name not in T_NAMES:
        raise ValueError(f"unknown t-state {name!r}")
    return int(name, 2)


def t_name(code: int) -> str:
    return T_NAMES[int(code)]


def _check_density(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0 or math.isnan(p):
        raise ValueError(f"edge density must lie in (0, 1), got {p}")
    return p


def trap_persistence_ratio(p: float) -> float:
    """Closed-form e^{-2 lambda_c(p)}, the geometric ratio of the trap-length law."""
    p = _check_density(p)
    root = math.sqrt(1.0 + 4.0 * p**2 - 8.0 * p**3 + 4.0 * p**4)
    return 0.5 * (1.0 + 2.0 * p - 2.0 * p * p - root)


def compute_lambda_c(p: float) -> float:
    """Critical bias separating positive from zero speed.

    Parameters
    ----------
    p : float
        Edge density in (0, 1).

    Returns
    -------
    float
        ``0.5 * log(2 / (1 + 2p - 2p^2 - sqrt(1 + 4p^2 - 8p^3 + 4p^4)))``.
    """
    return -0.5 * math.log(trap_persistence_ratio(p))


def slab_update(ab: int, eta: int) -> int:
    """Propagate backwards communication through one slab.

    ``(i, 0)`` is reached from the left iff ``h0`` is open and ``(i-1, 0)`` was
    reached, or ``v`` and ``h1`` are open and ``(i-1, 1)`` was reached; the
    top vertex is symmetric. Returns a t-state code, possibly 0.
    """
    if not 0 <= ab < 4:
        raise ValueError(f"t-state code out of range: {ab}")
    return _slab_update(int(ab), int(eta))


def _slab_update(ab: int, eta: int) -> int:
    a = ab & LEVEL0
    b = ab & LEVEL1
    h0 = eta & H0
    h1 = eta & H1
    v = eta & V
    bottom = (h0 and a) or (v and h1 and b)
    top = (h1 and b) or (v and h0 and a)
    return (LEVEL0 if bottom else 0) | (LEVEL1 if top else 0)


# (4, 8) lookup table; index [t_state, slab_code]
SLAB_UPDATE_TABLE = np.array(
    [[_slab_update(ab, eta) for eta in range(8)] for ab in range(4)], dtype=np.int8
)

N_OPEN = np.array([bin(eta).count("1") for eta in range(8)], dtype=np.int64)


def slab_weights(p: float) -> np.ndarray:
    """Unconditioned i.i.d. probabilities of the 8 slab patterns."""
    p = _check_density(p)
    return p**N_OPEN * (1.0 - p) ** (3 - N_OPEN)


def trap_length_pmf(p: float, m: int) -> float:
    """Law of a trap length: ``(e^{2 lambda_c} - 1) e^{-2 lambda_c m}`` for m >= 1."""
    if int(m) != m or m < 1:
        raise ValueError(f"trap length must be a positive integer, got {m}")
    q = trap_persistence_ratio(p)
    # (1/q - 1) q^m, written to avoid overflow for large m
    return (1.0 - q) * q ** (int(m) - 1)


@dataclass(frozen=True)
class ModelParams:
    p: float
    lam: float

    def __post_init__(self):
        _check_density(self.p)
        if not self.lam >= 0.0:
            raise ValueError(f"bias must be >= 0, got {self.lam}")

    @property
    def lambda_c(self) -> float:
        return compute_lambda_c(self.p)
