"""Electrical-network view of the walk restricted to the backbone.

The walk is reversible with conductances ``exp(lam (x(u) + x(w)))`` on open
edges. Harmonic systems are solved by vertex elimination (Kron reduction)
rather than a dense solve: with strong bias the dense system is numerically
singular, while elimination only ever adds positive terms.
"""
from __future__ import annotations

import math

import numpy as np

from ..environment.config import LadderConfig
from ..environment.model import Vertex


class DisconnectedError(ValueError):
    pass


def _backbone_graph(config: LadderConfig, x_lo: int, x_hi: int):
    """Backbone vertices with ``x_lo <= x <= x_hi`` and open edges between them."""
    bb = config.backbone
    right, vert = config.edge_arrays()
    verts = [(x, y) for x in range(x_lo, x_hi + 1) for y in (0, 1) if bb[x - config.x_min, y]]
    index = {v: i for i, v in enumerate(verts)}
    edges = []
    for (x, y), i in index.items():
        k = x - config.x_min
        if right[k, y] and (x + 1, y) in index:
            edges.append((i, index[(x + 1, y)]))
        if y == 0 and vert[k] and (x, 1) in index:
            edges.append((i, index[(x, 1)]))
    return verts, index, edges


def _conductances(verts, edges, lam, x_ref):
    """Adjacency dict of conductances scaled by ``exp(-2 lam x_ref)``."""
    adj = {i: {} for i in range(len(verts))}
    for i, j in edges:
        c = math.exp(lam * (verts[i][0] + verts[j][0] - 2 * x_ref))
        adj[i][j] = adj[i].get(j, 0.0) + c
        adj[j][i] = adj[j].get(i, 0.0) + c
    return adj


def _merge(adj, group, label):
    """Short-circuit the vertices of ``group`` into a single node ``label``."""
    adj[label] = {}
    for g in group:
        for w, c in adj.pop(g).items():
            if w in group:
                continue
            adj[label][w] = adj[label].get(w, 0.0) + c
            del adj[w][g]
            adj[w][label] = adj[w].get(label, 0.0) + c


def _kron_reduce(adj, keep, order):
    """Eliminate every vertex not in ``keep`` (in ``order``) by Schur complement.

    Each elimination replaces the star at a vertex by the complete graph on
    its neighbours with conductances ``c_a c_b / sum c``; only positive terms
    are combined, so the reduction is exact up to rounding even when
    conductances span hundreds of orders of magnitude.
    """
    for u in order:
        if u in keep or u not in adj:
            continue
        nbrs = adj.pop(u)
        total = sum(nbrs.values())
        items = list(nbrs.items())
        for a, ca in items:
            del adj[a][u]
        for ia, (a, ca) in enumerate(items):
            for b, cb in items[ia + 1:]:
                # ratio first: the plain product underflows far from x_ref
                c = ca * (cb / total)
                adj[a][b] = adj[a].get(b, 0.0) + c
                adj[b][a] = adj[b].get(a, 0.0) + c
    return adj


def _elimination_order(verts, x_ref):
    # far columns first keeps fill-in local
    return sorted(range(len(verts)), key=lambda i: -abs(verts[i][0] - x_ref))


def hitting_probability(config: LadderConfig, lam: float, v: Vertex, hit, avoid, x_range=None) -> float:
    """``P^v(reach hit before avoid)`` for the walk on the backbone.

    ``x_range`` restricts the network to a column range; it must separate
    ``v`` from everything the walk cannot reach without first hitting one of
    the two sets. The harmonic system is solved by eliminating all other
    vertices, leaving a three-node network ``v, hit, avoid``.
    """
    lo, hi = x_range if x_range is not None else (config.x_min, config.x_max)
    verts, index, edges = _backbone_graph(config, lo, hi)
    key = (v.x, v.y)
    if key not in index:
        raise DisconnectedError(f"{v} is not a backbone vertex of the range")
    A_set = {index[(u.x, u.y)] for u in hit if (u.x, u.y) in index}
    B_set = {index[(u.x, u.y)] for u in avoid if (u.x, u.y) in index} - A_set
    if not A_set:
        raise DisconnectedError("no target vertex on the backbone")
    iv = index[key]
    if iv in A_set:
        return 1.0
    if iv in B_set:
        return 0.0
    adj = _conductances(verts, edges, lam, v.x)
    A, B = "hit", "avoid"
    _merge(adj, A_set, A)
    if B_set:
        _merge(adj, B_set, B)
    _kron_reduce(adj, {iv, A, B}, _elimination_order(verts, v.x))
    to_a = adj[iv].get(A, 0.0)
    to_b = adj[iv].get(B, 0.0)
    if to_a + to_b == 0:
        raise DisconnectedError(f"{v} reaches neither set")
    return to_a / (to_a + to_b)


def effective_resistance(config: LadderConfig, lam: float, v: Vertex, targets) -> float:
    """Effective resistance between ``v`` and a vertex set on the windowed backbone.

    The targets are shorted together and every other vertex is eliminated;
    the resistance is the reciprocal of the remaining conductance.
    """
    verts, index, edges = _backbone_graph(config, config.x_min, config.x_max)
    key = (v.x, v.y)
    if key not in index:
        raise DisconnectedError(f"{v} is not on the backbone")
    tset = {index[(u.x, u.y)] for u in targets if (u.x, u.y) in index}
    if not tset:
        raise DisconnectedError("no target on the backbone")
    iv = index[key]
    if iv in tset:
        return 0.0
    adj = _conductances(verts, edges, lam, v.x)
    _merge(adj, tset, "t")
    _kron_reduce(adj, {iv, "t"}, _elimination_order(verts, v.x))
    c = adj[iv].get("t", 0.0)
    if c <= 0:
        raise DisconnectedError(f"{v} is not connected to the targets")
    # conductances were scaled by exp(-2 lam x(v))
    return math.exp(-2 * lam * v.x) / c


def series_resistance(lam: float, m: int, k: int) -> float:
    """Resistance of a monotone path from column m to column k: ``sum_{j=2m}^{2k-1} e^{-j lam}``."""
    j = np.arange(2 * m, 2 * k)
    return float(np.sum(np.exp(-lam * j)))


def nash_williams_bound(lam: float, m: int) -> float:
    """Lower bound on the resistance between column m and the origin."""
    return 0.5 * -math.expm1(-2 * lam * m) / (math.exp(lam) - math.exp(-lam))


def return_probability_bound(lam: float, m: int, k: int) -> float:
    """Upper bound on hitting the origin before column k from a backbone vertex at column m."""
    return (2 * math.expm1(2 * lam) / math.expm1(lam)
            * -math.expm1(-2 * lam * (k - m)) / -math.expm1(-2 * lam * m) * math.exp(-2 * lam * m))
