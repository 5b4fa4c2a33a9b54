"""Conditioned t-state chain obtained as a Doob transform of the slab chain."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import COND_STATES, H0, H1, SLAB_UPDATE_TABLE, _check_density, slab_weights

# slab pattern that keeps a trap going: both horizontals open, vertical closed
TRAP_BODY = H0 | H1


class PerronError(RuntimeError):
    pass


def _power_iteration(A: np.ndarray, tol: float = 1e-14, max_iter: int = 100_000):
    """Leading eigenpair of a nonnegative irreducible matrix (right vector, sum 1)."""
    x = np.full(A.shape[0], 1.0 / A.shape[0])
    value = 0.0
    for _ in range(max_iter):
        y = A @ x
        new_value = y.sum()
        y /= new_value
        if np.max(np.abs(y - x)) <= tol * np.max(np.abs(y)) and abs(new_value - value) <= tol * new_value:
            return new_value, y
        x, value = y, new_value
    raise PerronError(f"power iteration did not converge in {max_iter} steps")


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Conditioned chain of backwards-communicating patterns at density ``p``.

    Attributes
    ----------
    Q : (4, 4) array
        Unconditioned slab-weight matrix over t-state codes 0..3 (00 absorbing).
    P_cond : (3, 3) array
        Doob transform of ``Q`` restricted to (01, 10, 11), conditioned never to hit 00.
    pi : (3,) array
        Stationary law of ``P_cond``.
    perron_value, h : float, (3,) array
        Leading eigenvalue and right eigenvector of the restricted ``Q``.
    slab_laws : (3, 3, 8) array
        ``slab_laws[i, j]`` is the law of the slab given the transition
        ``COND_STATES[i] -> COND_STATES[j]`` (zeros if the transition is impossible).
    """

    p: float
    Q: np.ndarray
    P_cond: np.ndarray
    pi: np.ndarray
    perron_value: float
    h: np.ndarray
    left: np.ndarray
    slab_laws: np.ndarray
    _cum: dict = field(default_factory=dict, repr=False)

    def state_index(self, code: int) -> int:
        return COND_STATES.index(int(code))

    def trap_persistence(self) -> float:
        """Probability, from state 11, that the next slab extends a trap body.

        This is the geometric ratio between consecutive trap-length
        probabilities and equals ``exp(-2 lambda_c)``.
        """
        i = self.state_index(3)
        return float(self.P_cond[i, i] * self.slab_laws[i, i, TRAP_BODY])

    def trap_exit_probability(self) -> float:
        """From state 11: exactly one horizontal open, the other and the vertical closed."""
        i = self.state_index(3)
        total = 0.0
        for eta in (H0, H1):
            cd = SLAB_UPDATE_TABLE[3, eta]
            j = self.state_index(cd)
            total += self.P_cond[i, j] * self.slab_laws[i, j, eta]
        return float(total)

    @property
    def gamma(self) -> float:
        return self.trap_exit_probability()

    def cumulative_tables(self):
        """Cumulative arrays used by the compiled samplers: (pi, P_cond, slab_laws)."""
        if not self._cum:
            self._cum["pi"] = np.cumsum(self.pi)
            self._cum["P"] = np.cumsum(self.P_cond, axis=1)
            self._cum["slab"] = np.cumsum(self.slab_laws, axis=2)
            for arr in self._cum.values():
                arr.setflags(write=False)
        return self._cum["pi"], self._cum["P"], self._cum["slab"]


@lru_cache(maxsize=64)
def build_transfer_matrix(p: float) -> TransferMatrix:
    p = _check_density(p)
    w = slab_weights(p)
    Q = np.zeros((4, 4))
    for ab in range(4):
        for eta in range(8):
            Q[ab, SLAB_UPDATE_TABLE[ab, eta]] += w[eta]
    idx = np.array(COND_STATES)
    Q3 = Q[np.ix_(idx, idx)]
    rho, h = _power_iteration(Q3)
    rho_l, left = _power_iteration(Q3.T)
    if abs(rho - rho_l) > 1e-12 * rho:
        raise PerronError(f"left/right Perron values disagree: {rho} vs {rho_l}")

    P = Q3 * h[None, :] / (rho * h[:, None])
    # exact row normalisation removes the last ulp of power-iteration error
    P /= P.sum(axis=1, keepdims=True)
    pi = left * h
    pi /= pi.sum()

    laws = np.zeros((3, 3, 8))
    for i, ab in enumerate(COND_STATES):
        for eta in range(8):
            cd = SLAB_UPDATE_TABLE[ab, eta]
            if cd:
                laws[i, idx.tolist().index(cd), eta] += w[eta]
    norms = laws.sum(axis=2, keepdims=True)
    laws = np.divide(laws, norms, out=np.zeros_like(laws), where=norms > 0)

    for arr in (Q, P, pi, h, left, laws):
        arr.setflags(write=False)
    return TransferMatrix(p, Q, P, pi, float(rho), h, left, laws)


def perron_value(p: float) -> float:
    return build_transfer_matrix(p).perron_value
