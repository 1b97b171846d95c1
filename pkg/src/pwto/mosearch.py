"""Bi-objective Pareto search over graphs with integer cost vectors.

``moa_star`` is a label-setting multi-objective A*: labels are popped in
lexicographic ``(f1, f2)`` order, so a label is dominated at a vertex exactly
when its second cost is not below the smallest second cost already expanded
there. That makes the per-vertex frontier check O(1) for two objectives.
Heuristics are exact single-objective distances to the goal from reverse
Dijkstra passes.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

__all__ = [
    "VectorGraph",
    "ParetoPath",
    "ParetoFront",
    "SearchBudgetError",
    "dominates",
    "non_dominated",
    "reverse_distances",
    "moa_star",
    "brute_force_pareto",
    "dump_front",
]

INF = float("inf")


class SearchBudgetError(RuntimeError):
    """Exhaustive enumeration exceeded its path budget."""


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere."""
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def non_dominated(costs: Iterable[Sequence[float]]) -> list[tuple]:
    """Cost-unique non-dominated subset, sorted by the first objective."""
    uniq = sorted(set(tuple(c) for c in costs))
    out: list[tuple] = []
    best2 = INF
    for c in uniq:
        # sorted lexicographically: c is dominated iff an earlier entry has c2 <= c[1]
        if c[1] < best2:
            out.append(c)
            best2 = c[1]
    return out


class VectorGraph:
    """Directed graph in CSR form with a 2-vector of integer costs per edge.

    ``labels`` optionally maps vertex ids back to user-facing vertex objects.
    """

    def __init__(self, n, indptr, indices, costs, edge_data=None, labels=None):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.costs = np.asarray(costs, dtype=np.int64).reshape(-1, 2)
        self.edge_data = None if edge_data is None else np.asarray(edge_data)
        self.labels = labels
        self._index = None if labels is None else {v: i for i, v in enumerate(labels)}
        self._adj = None

    @classmethod
    def from_arrays(cls, n, src, dst, costs, edge_data=None, labels=None):
        src = np.asarray(src, dtype=np.int64)
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        costs = np.asarray(costs).reshape(-1, 2)
        if np.any(costs < 0):
            raise ValueError("edge costs must be non-negative")
        ed = None if edge_data is None else np.asarray(edge_data)[order]
        return cls(n, indptr, np.asarray(dst)[order], costs[order], ed, labels)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[Hashable, Hashable, Sequence[int]]]):
        """Build from ``(u, v, (c1, c2))`` triples with arbitrary hashable vertices."""
        edges = list(edges)
        labels: list = []
        index: dict = {}
        for u, v, _ in edges:
            for x in (u, v):
                if x not in index:
                    index[x] = len(labels)
                    labels.append(x)
        src = [index[u] for u, _, _ in edges]
        dst = [index[v] for _, v, _ in edges]
        costs = np.array([c for _, _, c in edges], dtype=np.int64).reshape(-1, 2)
        return cls.from_arrays(len(labels), src, dst, costs, labels=labels)

    def vid(self, v) -> int:
        if self._index is not None:
            return self._index[v]
        return int(v)

    def label(self, i: int):
        return self.labels[i] if self.labels is not None else int(i)

    def adjacency(self):
        """Python lists ``[(dst, c1, c2, edge_no), ...]`` per vertex; cached."""
        if self._adj is None:
            ind = self.indices.tolist()
            c1 = self.costs[:, 0].tolist()
            c2 = self.costs[:, 1].tolist()
            ptr = self.indptr.tolist()
            self._adj = [
                [(ind[e], c1[e], c2[e], e) for e in range(ptr[u], ptr[u + 1])] for u in range(self.n)
            ]
        return self._adj

    def edge_sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))


def reverse_distances(graph: VectorGraph, goal: int) -> np.ndarray:
    """Exact per-objective cost-to-go to ``goal``; shape (n, 2), inf if unreachable."""
    src = graph.edge_sources()
    out = np.empty((graph.n, 2))
    for k in range(2):
        w = graph.costs[:, k].astype(float)
        # parallel edges would be summed by the sparse constructor: keep the min
        key = src * graph.n + graph.indices
        order = np.lexsort((w, key))
        first = np.ones(len(order), dtype=bool)
        first[1:] = key[order][1:] != key[order][:-1]
        sel = order[first]
        # reversed graph: edge v -> u for every u -> v
        m = sp.csr_matrix((w[sel], (graph.indices[sel], src[sel])), shape=(graph.n, graph.n))
        out[:, k] = dijkstra(m, directed=True, indices=goal)
    return out


@dataclass
class ParetoPath:
    vertices: list
    cost: tuple[int, int]
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    edges: list[int] = field(default_factory=list)
    cost_unscaled: tuple[float, float] | None = None

    def scalarized(self, w: float = 0.5) -> float:
        c = self.cost_unscaled if self.cost_unscaled is not None else self.cost
        return w * c[0] + (1 - w) * c[1]


@dataclass
class ParetoFront:
    entries: list[ParetoPath]
    unreachable: bool = False
    n_expanded: int = 0
    n_generated: int = 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def costs(self) -> list[tuple[int, int]]:
        return [p.cost for p in self.entries]


def _build_path(graph: VectorGraph, lab_v, lab_parent, lab_edge, lid, cost, lattice=None) -> ParetoPath:
    vids, edges = [], []
    while lid >= 0:
        vids.append(lab_v[lid])
        if lab_edge[lid] >= 0:
            edges.append(lab_edge[lid])
        lid = lab_parent[lid]
    vids.reverse()
    edges.reverse()
    return _make_path(graph, vids, edges, cost, lattice)


def _make_path(graph, vids, edges, cost, lattice=None) -> ParetoPath:
    verts = [graph.label(v) if lattice is None else lattice.vertex_of(v) for v in vids]
    scale = None
    if lattice is not None:
        pts = [np.asarray(lattice.position(verts[0]))[None]]
        for v, e in zip(verts[:-1], edges):
            pts.append(lattice.edge_polyline(v, int(graph.edge_data[e]))[1:])
        points = np.concatenate(pts)
        scale = lattice.cost_scale
    else:
        points = np.zeros((0, 2))
    cost = (int(cost[0]), int(cost[1]))
    unscaled = (cost[0] / scale, cost[1] / scale) if scale else (float(cost[0]), float(cost[1]))
    return ParetoPath(verts, cost, points, list(edges), unscaled)


def _resolve(graph_or_lattice):
    from .lattice import Lattice

    if isinstance(graph_or_lattice, Lattice):
        return graph_or_lattice.graph(), graph_or_lattice
    return graph_or_lattice, None


def moa_star(graph, v_init, v_goal, heuristic: np.ndarray | None = None) -> ParetoFront:
    """Cost-unique Pareto-optimal paths from ``v_init`` to ``v_goal``.

    ``graph`` is a :class:`VectorGraph` or a :class:`~pwto.lattice.Lattice`
    (whose vertices are then ``LatticeVertex`` objects and whose paths carry
    polylines and unscaled costs).
    """
    g, lattice = _resolve(graph)
    s = lattice.vertex_id(v_init) if lattice is not None else g.vid(v_init)
    t = lattice.vertex_id(v_goal) if lattice is not None else g.vid(v_goal)
    if s == t:
        raise ValueError("start and goal vertices coincide")
    h = reverse_distances(g, t) if heuristic is None else heuristic
    if not np.isfinite(h[s, 0]):
        return ParetoFront([], unreachable=True)
    h1 = h[:, 0].tolist()
    h2 = h[:, 1].tolist()
    adj = g.adjacency()

    g2min = [INF] * g.n
    lab_v: list[int] = [s]
    lab_parent: list[int] = [-1]
    lab_edge: list[int] = [-1]
    heap = [(h1[s], h2[s], 0, 0, 0, 0)]  # f1, f2, fifo, g1, g2, label
    counter = 1
    sols: list[tuple[int, int, int]] = []
    n_exp = 0
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        _, f2, _, g1, g2, lid = pop(heap)
        v = lab_v[lid]
        if g2 >= g2min[v] or f2 >= g2min[t]:
            continue
        g2min[v] = g2
        n_exp += 1
        if v == t:
            sols.append((g1, g2, lid))
            continue
        for w, c1, c2, e in adj[v]:
            ng2 = g2 + c2
            if ng2 >= g2min[w]:
                continue
            hw2 = h2[w]
            if ng2 + hw2 >= g2min[t] or hw2 == INF:
                continue
            ng1 = g1 + c1
            lab_v.append(w)
            lab_parent.append(lid)
            lab_edge.append(e)
            push(heap, (ng1 + h1[w], ng2 + hw2, counter, ng1, ng2, len(lab_v) - 1))
            counter += 1
    entries = [_build_path(g, lab_v, lab_parent, lab_edge, lid, (c1, c2), lattice) for c1, c2, lid in sols]
    return ParetoFront(entries, unreachable=not entries, n_expanded=n_exp, n_generated=counter)


def _plain_dijkstra_to(adj, n: int, goal: int, a: float, b: float) -> list[float]:
    """Cost-to-go to ``goal`` under the edge weight ``a * c1 + b * c2``."""
    radj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for u in range(n):
        for w, c1, c2, _ in adj[u]:
            radj[w].append((u, a * c1 + b * c2))
    dist = [INF] * n
    dist[goal] = 0
    heap = [(0, goal)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, c in radj[v]:
            if d + c < dist[u]:
                dist[u] = d + c
                heapq.heappush(heap, (d + c, u))
    return dist


# weights (a, 1) of the supporting lines used by the oracle's lower-bound region
_ORACLE_SLOPES = tuple(float(x) for x in np.logspace(-2, 2, 9))


def brute_force_pareto(graph, v_init, v_goal, hop_limit: int, budget: int = 1_000_000) -> ParetoFront:
    """Exhaustive Pareto front over simple paths of at most ``hop_limit`` edges.

    Depth-first enumeration of simple paths with a safe bound: every
    completion of a partial path ending at ``w`` with cost ``g`` costs some
    ``x`` with ``x_i >= g_i + h_i(w)`` and ``a x_1 + x_2 >= a g_1 + g_2 +
    d_a(w)`` for a few slopes ``a``, where ``h_i`` and ``d_a`` are exact
    single-objective cost-to-go values. The partial path is abandoned only if
    every integer point of that region is weakly dominated by a complete path
    already found, so no distinct non-dominated cost can be lost. The
    cost-to-go values come from a plain heap Dijkstra written here,
    independently of :func:`reverse_distances`; the oracle shares no search
    code with :func:`moa_star`. ``budget`` caps the number of partial paths.
    """
    g, lattice = _resolve(graph)
    s = lattice.vertex_id(v_init) if lattice is not None else g.vid(v_init)
    t = lattice.vertex_id(v_goal) if lattice is not None else g.vid(v_goal)
    adj = g.adjacency()
    h1 = _plain_dijkstra_to(adj, g.n, t, 1, 0)
    h2 = _plain_dijkstra_to(adj, g.n, t, 0, 1)
    cuts = [(a, _plain_dijkstra_to(adj, g.n, t, a, 1.0)) for a in _ORACLE_SLOPES]
    # children by ascending lower bound: the first complete path is then c1-optimal, which
    # makes the bound test bite early; the order does not affect the result
    adj = [sorted(nb, key=lambda e: (e[1] + h1[e[0]], e[2] + h2[e[0]])) for nb in adj]
    found: dict[tuple[int, int], tuple[list[int], list[int]]] = {}
    corners: list[tuple[float, float]] = []
    on_path = [False] * g.n
    vpath = [s]
    epath: list[int] = []
    on_path[s] = True
    visited = 0
    big = float(2**62)

    def may_improve(w, g1, g2):
        """Whether a completion through ``w`` can be weakly undominated by ``found``."""
        if not corners:
            return True
        l1, l2 = g1 + h1[w], g2 + h2[w]
        rhs = [(a, a * g1 + g2 + d[w]) for a, d in cuts]
        for k1, k2 in corners:
            x1, x2 = k1 - 1, k2 - 1  # integer costs: strictly below the corner
            if x1 < l1 or x2 < l2:
                continue
            if all(a * x1 + x2 >= r - 1e-9 * abs(r) - 1e-6 for a, r in rhs):
                return True
        return False

    def update_corners():
        stair = non_dominated(found)
        corners.clear()
        corners.append((stair[0][0], big))
        corners.extend((stair[i + 1][0], stair[i][1]) for i in range(len(stair) - 1))
        corners.append((big, stair[-1][1]))

    stack = [(s, 0, 0, iter(adj[s]))]
    while stack:
        v, g1, g2, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            on_path[v] = False
            vpath.pop()
            if epath:
                epath.pop()
            continue
        w, c1, c2, e = nxt
        if on_path[w] or len(vpath) > hop_limit:
            continue
        n1, n2 = g1 + c1, g2 + c2
        visited += 1
        if visited > budget:
            raise SearchBudgetError(f"more than {budget} partial paths enumerated")
        if h1[w] == INF or not may_improve(w, n1, n2):
            continue
        if w == t:
            key = (n1, n2)
            if key not in found:
                found[key] = (vpath + [w], epath + [e])
                update_corners()
            continue
        on_path[w] = True
        vpath.append(w)
        epath.append(e)
        stack.append((w, n1, n2, iter(adj[w])))

    front = non_dominated(found)
    entries = [_make_path(g, found[c][0], found[c][1], c, lattice) for c in front]
    return ParetoFront(entries, unreachable=not entries)


def dump_front(front: ParetoFront, path, kept: Sequence[bool] | None = None) -> None:
    """JSON list of ``{cost, n_vertices, polyline}``; optional ``kept`` flags."""
    items = []
    for i, p in enumerate(front.entries):
        item = {
            "cost": list(p.cost_unscaled if p.cost_unscaled is not None else p.cost),
            "cost_scaled": list(p.cost),
            "n_vertices": len(p.vertices),
            "polyline": np.asarray(p.points).tolist(),
        }
        if kept is not None:
            item["kept"] = bool(kept[i])
        items.append(item)
    Path(path).write_text(json.dumps(items))
