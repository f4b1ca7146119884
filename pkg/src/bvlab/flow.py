"""Exact minimum cuts on grid networks.

Forced-in cells are contracted into a super source and forced-out cells into a
super sink; only free cells become graph nodes.  Capacities are scaled by a
power of two and rounded to int64, then Dinic's algorithm (compiled with
numba) computes a maximum flow.  The returned set is the minimal minimizer:
the sources together with every free cell reachable from the source in the
residual network.  Its cut value is recomputed in floating point from the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidArgument, Unsupported
from .grid import CellSet, GridSpace

__all__ = ["CutProblem", "CutResult", "min_cut", "enumerate_oracle", "cut_value"]

ORACLE_MAX_FREE = 20
# the sum of all integer capacities stays below 2**62, safely inside int64
_INT_BUDGET = 2.0**62


@dataclass(frozen=True, eq=False)
class CutProblem:
    """Cells forced inside (``sources``), forced outside (``sinks``) and ``free``.

    ``free`` defaults to every cell that is neither a source nor a sink.
    """

    sources: CellSet
    sinks: CellSet
    free: CellSet | None = None

    def __post_init__(self):
        space = self.sources.space
        if self.sinks.space is not space:
            raise InvalidArgument("sources and sinks live in different spaces")
        if (self.sources.mask & self.sinks.mask).any():
            raise InvalidArgument("sources and sinks overlap")
        if self.free is None:
            object.__setattr__(self, "free", ~(self.sources | self.sinks))
        elif self.free.space is not space:
            raise InvalidArgument("free set lives in a different space")
        else:
            if (self.free.mask & (self.sources.mask | self.sinks.mask)).any():
                raise InvalidArgument("free cells must be disjoint from sources and sinks")
            if not (self.free.mask | self.sources.mask | self.sinks.mask).all():
                raise InvalidArgument("sources, sinks and free must cover every cell")

    @property
    def space(self) -> GridSpace:
        return self.sources.space


@dataclass(frozen=True, eq=False)
class CutResult:
    value: float
    set: CellSet
    saturated_edges: np.ndarray = field(repr=False)
    flow_value: float = 0.0


def cut_value(space: GridSpace, mask: np.ndarray) -> float:
    """Total weight of edges between ``mask`` and its complement."""
    cut = mask[space.edge_u] != mask[space.edge_v]
    return float(space.edge_weights[cut].sum())


def _cut_edges(space: GridSpace, mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(mask[space.edge_u] != mask[space.edge_v])


# --------------------------------------------------------------------------
# Dinic's algorithm on a CSR arc list.  Node ``n`` is the source, ``n + 1`` the
# sink.  Arcs come in pairs (2k, 2k + 1) that are mutual reverses.
# --------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _bfs(start, head, to, cap, level, queue, n_nodes, sink):
    for i in range(n_nodes):
        level[i] = -1
    level[start] = 0
    qh = 0
    qt = 1
    queue[0] = start
    while qh < qt:
        v = queue[qh]
        qh += 1
        if level[sink] >= 0 and level[v] >= level[sink]:
            break
        for a in range(head[v], head[v + 1]):
            w = to[a]
            if cap[a] > 0 and level[w] < 0:
                level[w] = level[v] + 1
                queue[qt] = w
                qt += 1
    return level[sink] >= 0


@numba.njit(cache=True, nogil=True)
def _dfs_block(source, sink, head, to, rev, cap, level, it, stack_v, stack_a):
    """Push one blocking flow with an iterative DFS; returns flow pushed."""
    total = 0
    while True:
        depth = 0
        stack_v[0] = source
        found = False
        while True:
            v = stack_v[depth]
            if v == sink:
                found = True
                break
            advanced = False
            while it[v] < head[v + 1]:
                a = it[v]
                w = to[a]
                if cap[a] > 0 and level[w] == level[v] + 1:
                    stack_a[depth] = a
                    depth += 1
                    stack_v[depth] = w
                    advanced = True
                    break
                it[v] += 1
            if not advanced:
                if depth == 0:
                    break
                # dead end: retreat and skip the arc that led here
                level[v] = -1
                depth -= 1
                it[stack_v[depth]] += 1
        if not found:
            return total
        bottleneck = cap[stack_a[0]]
        for d in range(1, depth):
            c = cap[stack_a[d]]
            if c < bottleneck:
                bottleneck = c
        for d in range(depth):
            a = stack_a[d]
            cap[a] -= bottleneck
            cap[rev[a]] += bottleneck
        total += bottleneck


@numba.njit(cache=True, nogil=True)
def _max_flow(n_nodes, source, sink, head, to, rev, cap):
    level = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    it = np.empty(n_nodes, dtype=np.int64)
    stack_v = np.empty(n_nodes + 1, dtype=np.int64)
    stack_a = np.empty(n_nodes + 1, dtype=np.int64)
    flow = 0
    while _bfs(source, head, to, cap, level, queue, n_nodes, sink):
        for i in range(n_nodes):
            it[i] = head[i]
        flow += _dfs_block(source, sink, head, to, rev, cap, level, it, stack_v, stack_a)
    # residual reachability from the source
    reach = np.zeros(n_nodes, dtype=np.bool_)
    reach[source] = True
    qh = 0
    qt = 1
    queue[0] = source
    while qh < qt:
        v = queue[qh]
        qh += 1
        for a in range(head[v], head[v + 1]):
            w = to[a]
            if cap[a] > 0 and not reach[w]:
                reach[w] = True
                queue[qt] = w
                qt += 1
    return flow, reach


def _build_network(space: GridSpace, problem: CutProblem):
    """Arc arrays of the contracted network, plus scale and constant cut part."""
    src = problem.sources.mask
    snk = problem.sinks.mask
    free = problem.free.mask
    n = int(free.sum())
    node = -np.ones(space.n_cells, dtype=np.int64)
    node[free] = np.arange(n)
    S, T = n, n + 1
    node[src] = S
    node[snk] = T
    u = node[space.edge_u]
    v = node[space.edge_v]
    w = space.edge_weights
    keep = u != v
    const = (u == S) & (v == T) | (u == T) & (v == S)
    keep &= ~const
    const_value = float(w[const].sum())
    u, v, w = u[keep], v[keep], w[keep]

    total = float(w.sum()) * 2.0 + 1.0
    wmax = float(w.max()) if w.size else 1.0
    # power-of-two scale, so unscaling is exact
    exp = math.floor(math.log2(_INT_BUDGET / max(total, wmax)))
    scale = 2.0**exp
    icap = np.rint(w * scale).astype(np.int64)
    icap = np.maximum(icap, 1)

    # undirected edge -> two arcs, each the reverse of the other, both with capacity
    m = u.size
    tail = np.empty(2 * m, dtype=np.int64)
    head_node = np.empty(2 * m, dtype=np.int64)
    tail[0::2], tail[1::2] = u, v
    head_node[0::2], head_node[1::2] = v, u
    caps = np.empty(2 * m, dtype=np.int64)
    caps[0::2] = icap
    caps[1::2] = icap
    order = np.argsort(tail, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    pair = np.arange(2 * m) ^ 1
    rev = inv[pair[order]]
    to = head_node[order]
    caps = caps[order]
    counts = np.bincount(tail, minlength=n + 2)
    head = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return n, node, head, to, rev, caps, scale, const_value


def min_cut(problem: CutProblem) -> CutResult:
    """Exact minimum cut with the minimal minimizer as the returned set."""
    space = problem.space
    src = problem.sources.mask
    if not src.any():
        return CutResult(0.0, space.empty(), np.empty(0, dtype=np.int64), 0.0)
    n, node, head, to, rev, caps, scale, const_value = _build_network(space, problem)
    cap0 = caps.copy()
    flow, reach = _max_flow(n + 2, n, n + 1, head, to, rev, caps)
    if reach[n + 1]:
        raise RuntimeError("max-flow terminated with the sink still reachable")
    mask = src.copy()
    free_idx = np.flatnonzero(problem.free.mask)
    mask[free_idx] = reach[node[free_idx]]
    # integer cut equals integer flow (duality); report the float value of the set
    tails = np.repeat(np.arange(n + 2), np.diff(head))
    int_cut = int(cap0[reach[tails] & ~reach[to]].sum())
    if int_cut != int(flow):
        raise RuntimeError("flow certificate does not match the cut")
    value = cut_value(space, mask)
    flow_value = float(flow) / scale + const_value
    return CutResult(value, CellSet(space, mask), _cut_edges(space, mask), flow_value)


def enumerate_oracle(problem: CutProblem) -> CutResult:
    """Brute-force minimum over every admissible set.

    Ties go to the smallest cardinality, then to the lexicographically first
    membership vector (ordered by cell index, members first).
    """
    space = problem.space
    free_idx = np.flatnonzero(problem.free.mask)
    k = free_idx.size
    if k > ORACLE_MAX_FREE:
        raise Unsupported(f"|free| = {k} exceeds the oracle limit {ORACLE_MAX_FREE}")
    src = problem.sources.mask
    if not src.any():
        return CutResult(0.0, space.empty(), np.empty(0, dtype=np.int64), 0.0)
    eu, ev, w = space.edge_u, space.edge_v, space.edge_weights
    pos = -np.ones(space.n_cells, dtype=np.int64)
    pos[free_idx] = np.arange(k)
    # all 2**k membership vectors; bit j of the code is free cell j
    codes = np.arange(1 << k, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(k)) & 1).astype(bool)
    inside_fixed = src
    values = np.zeros(codes.size)
    for a, b, we in zip(eu, ev, w):
        pa, pb = pos[a], pos[b]
        if pa < 0 and pb < 0:
            if inside_fixed[a] != inside_fixed[b]:
                values += we
        elif pa >= 0 and pb >= 0:
            values += we * (bits[:, pa] != bits[:, pb])
        else:
            j, other = (pa, b) if pa >= 0 else (pb, a)
            values += we * (bits[:, j] != inside_fixed[other])
    best_val = float(values.min())
    tied = np.flatnonzero(values <= best_val + 1e-12 * max(1.0, abs(best_val)))
    card = bits[tied].sum(axis=1)
    tied = tied[card == card.min()]
    # lexicographic on the sorted member index tuple
    winner = min(tied, key=lambda c: tuple(np.flatnonzero(bits[c])))
    mask = src.copy()
    mask[free_idx[bits[winner]]] = True
    val = cut_value(space, mask)
    return CutResult(val, CellSet(space, mask), _cut_edges(space, mask), val)
