"""Compiled inner loops for environment sampling and annotation.

Column arrays are indexed by k = x - x_min. ``slab_at[k]`` is the slab of
column x_min + k for k >= 1; ``slab_at[0]`` is 0 (the boundary column has no
slab inside the window).
"""
import numpy as np
from numba import njit

from .model import H0, H1, LEVEL0, LEVEL1, V

TRAP_BODY = H0 | H1


@njit(cache=True)
def update(ab, eta):
    a = ab & LEVEL0
    b = ab & LEVEL1
    bottom = ((eta & H0) and a) or ((eta & V) and (eta & H1) and b)
    top = ((eta & H1) and b) or ((eta & V) and (eta & H0) and a)
    out = 0
    if bottom:
        out |= LEVEL0
    if top:
        out |= LEVEL1
    return out


@njit(cache=True)
def propagate(t0, slab_at):
    """t-states of all columns from the boundary state and the slabs."""
    n = slab_at.shape[0]
    t = np.empty(n, np.int8)
    t[0] = t0
    for k in range(1, n):
        t[k] = update(t[k - 1], slab_at[k])
    return t


@njit(cache=True)
def forwards(slab_at, t):
    """Forwards-communicating flags, shape (n, 2).

    Right boundary convention: a vertex in the last column is taken to
    continue to +infinity iff it is backwards communicating or joined to
    such a vertex by an open vertical.
    """
    n = slab_at.shape[0]
    fc = np.zeros((n, 2), np.bool_)
    last = n - 1
    b0 = (t[last] & LEVEL0) != 0
    b1 = (t[last] & LEVEL1) != 0
    vl = (slab_at[last] & V) != 0 and last > 0
    fc[last, 0] = b0 or (vl and b1)
    fc[last, 1] = b1 or (vl and b0)
    for k in range(last - 1, -1, -1):
        nxt = slab_at[k + 1]
        v = (slab_at[k] & V) != 0 and k > 0
        r0 = (nxt & H0) != 0 and fc[k + 1, 0]
        r1 = (nxt & H1) != 0 and fc[k + 1, 1]
        fc[k, 0] = r0 or (v and r1)
        fc[k, 1] = r1 or (v and r0)
    return fc


@njit(cache=True)
def pre_regeneration(slab_at, t):
    """Columns k whose top vertex is isolated (vertical, both top horizontals closed)."""
    n = slab_at.shape[0]
    out = np.zeros(n, np.bool_)
    for k in range(1, n - 1):
        s = slab_at[k]
        if (s & V) == 0 and (s & H1) == 0 and (slab_at[k + 1] & H1) == 0 and (t[k] & LEVEL0) != 0:
            out[k] = True
    return out


@njit(cache=True)
def find_traps(slab_at, cluster):
    """Trap pieces as rows (a, b, exit_level) in column indices.

    [a, b) is a trap piece when the vertical at a is open, every slab a+1..b
    is a trap body (both horizontals open, vertical closed) and the slab at
    b+1 has exactly one open horizontal. Pieces running off the right edge
    are not reported.
    """
    n = slab_at.shape[0]
    out = np.empty((n, 3), np.int64)
    count = 0
    for a in range(1, n):
        if (slab_at[a] & V) == 0 or not (cluster[a, 0] or cluster[a, 1]):
            continue
        j = a + 1
        while j < n and slab_at[j] == TRAP_BODY:
            j += 1
        if j >= n or j - 1 == a:
            continue
        s = slab_at[j]
        has0 = (s & H0) != 0
        has1 = (s & H1) != 0
        if has0 != has1:
            out[count, 0] = a
            out[count, 1] = j - 1
            out[count, 2] = 0 if has0 else 1
            count += 1
    return out[:count]


@njit(cache=True)
def _draw(cum, u):
    k = 0
    last = cum.shape[0] - 1
    while k < last and u >= cum[k]:
        k += 1
    return k


@njit(cache=True)
def chain_fill(cum_pi, cum_P, cum_slab, n_columns, rng):
    """Stationary conditioned chain: returns (t_states, slab_at) of length n_columns + 1."""
    t = np.empty(n_columns + 1, np.int8)
    s = np.zeros(n_columns + 1, np.uint8)
    i = _draw(cum_pi, rng.random())
    t[0] = i + 1
    for k in range(1, n_columns + 1):
        j = _draw(cum_P[i], rng.random())
        s[k] = _draw(cum_slab[i, j], rng.random())
        t[k] = j + 1
        i = j
    return t, s


@njit(cache=True)
def chain_continue(cum_P, cum_slab, t, s, start, stop, rng):
    """Fill columns start..stop-1 in place, continuing from t[start-1]."""
    i = t[start - 1] - 1
    for k in range(start, stop):
        j = _draw(cum_P[i], rng.random())
        s[k] = _draw(cum_slab[i, j], rng.random())
        t[k] = j + 1
        i = j


@njit(cache=True)
def rejection_fill(cum_w, n_columns, max_attempts, rng):
    """I.i.d. slabs conditioned on a left-right crossing, by rejection.

    The boundary column is a source (state 11). An attempt is abandoned as
    soon as no vertex of the current column is reachable, which does not
    change the law of accepted configurations. Returns (slab_at, attempts),
    attempts = -1 when the budget ran out.
    """
    s = np.zeros(n_columns + 1, np.uint8)
    for attempt in range(1, max_attempts + 1):
        state = 3
        ok = True
        for k in range(1, n_columns + 1):
            eta = _draw(cum_w, rng.random())
            s[k] = eta
            state = update(state, eta)
            if state == 0:
                ok = False
                break
        if ok:
            return s, attempt
    return s, -1
