"""Topology learning from nodal potential samples.

Each candidate edge ``(a, b)`` is weighted by the sample variance of
``pi_a - pi_b``; the operational tree is the minimum spanning tree under
those weights, found with Kruskal's algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DisconnectedCandidates, InsufficientSamples, UnmeasuredNode
from .simulator import MeasurementSet

DEFAULT_GROUP_THRESHOLD = 0.1

# Edge count per vectorised chunk in edge_variances; bounds memory at m * CHUNK floats.
_CHUNK = 1 << 16


class DisjointSetForest:
    """Union-find over ``0..n-1`` with union by rank and path compression."""

    __slots__ = ("parent", "rank", "components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of ``a`` and ``b``; False if already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.components -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def groups(self) -> list:
        out = {}
        for x in range(len(self.parent)):
            out.setdefault(self.find(x), []).append(x)
        return sorted(out.values())


def _normalise(candidates) -> np.ndarray:
    pairs = []
    for c in candidates:
        if hasattr(c, "key"):
            c = c.key
        u, v = int(c[0]), int(c[1])
        pairs.append((u, v) if u < v else (v, u))
    return np.array(pairs, dtype=np.intp).reshape(-1, 2)


def complete_graph(n: int) -> np.ndarray:
    iu, iv = np.triu_indices(n, k=1)
    return np.stack([iu, iv], axis=1)


@dataclass(frozen=True, eq=False)
class EdgeWeightMap:
    """Estimated variance of the potential difference for each candidate edge."""

    edges: np.ndarray
    weights: np.ndarray
    m: int

    def __len__(self):
        return len(self.weights)

    def as_dict(self) -> dict:
        return {(int(u), int(v)): float(w) for (u, v), w in zip(self.edges, self.weights)}

    def weight(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        hit = np.flatnonzero((self.edges[:, 0] == key[0]) & (self.edges[:, 1] == key[1]))
        if not hit.size:
            raise KeyError(key)
        return float(self.weights[hit[0]])


def edge_variances(ms: MeasurementSet, candidates=None) -> EdgeWeightMap:
    """Unbiased sample variance of ``pi_a - pi_b`` for every candidate edge.

    Without ``candidates`` every node pair is weighted.
    """
    X = ms.samples
    m, n = X.shape
    if m < 2:
        raise InsufficientSamples(f"variance needs at least 2 samples, got {m}")
    edges = complete_graph(n) if candidates is None else _normalise(candidates)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = int(edges.max() if edges.max() >= n else edges.min())
        raise UnmeasuredNode(f"candidate edge names node {bad}; measurements cover 0..{n - 1}")
    Xc = X - X.mean(axis=0)
    w = np.empty(len(edges))
    for s in range(0, len(edges), _CHUNK):
        e = edges[s:s + _CHUNK]
        d = Xc[:, e[:, 0]] - Xc[:, e[:, 1]]
        d -= d.mean(axis=0)
        w[s:s + _CHUNK] = np.einsum("ij,ij->j", d, d) / (m - 1)
    return EdgeWeightMap(edges, w, m)


@dataclass
class LearnedTopology:
    """Spanning tree picked by the learner.

    ``margins[i]`` is how much heavier the cheapest rejected candidate that
    could replace ``edges[i]`` is (``inf`` when no candidate can).
    """

    edges: list
    weights: list
    margins: list
    total_weight: float
    nodes: tuple = ()
    tie_count: int = 0
    complete_graph_agrees: Optional[bool] = None

    def edge_set(self) -> set:
        return {tuple(e) for e in self.edges}

    def to_dict(self) -> dict:
        return {
            "nodes": [int(a) for a in self.nodes],
            "edges": [
                {"u": int(u), "v": int(v), "weight": float(w),
                 "margin": None if math.isinf(mg) else float(mg)}
                for (u, v), w, mg in zip(self.edges, self.weights, self.margins)
            ],
            "total_weight": float(self.total_weight),
            "tie_count": int(self.tie_count),
            "complete_graph_agrees": self.complete_graph_agrees,
        }

    @classmethod
    def from_dict(cls, data) -> "LearnedTopology":
        edges = [(int(e["u"]), int(e["v"])) for e in data["edges"]]
        weights = [float(e.get("weight", 0.0)) for e in data["edges"]]
        margins = [math.inf if e.get("margin") is None else float(e["margin"]) for e in data["edges"]]
        return cls(edges, weights, margins, float(data.get("total_weight", math.fsum(weights))),
                   tuple(data.get("nodes", ())), int(data.get("tie_count", 0)),
                   data.get("complete_graph_agrees"))


def _sort_order(edges, weights):
    # weight, then smaller endpoint, then larger endpoint
    return np.lexsort((edges[:, 1], edges[:, 0], weights))


def kruskal_mst(nodes, candidates, weights) -> LearnedTopology:
    """Minimum spanning tree over ``nodes`` using ``candidates`` with ``weights``.

    ``nodes`` is a node count or an iterable of node ids; ``weights`` is an
    :class:`EdgeWeightMap` or a sequence aligned with ``candidates``.  Ties
    are broken by ``(weight, min endpoint, max endpoint)``.
    """
    if isinstance(weights, EdgeWeightMap):
        if candidates is None:
            edges, w = weights.edges, np.asarray(weights.weights, dtype=float)
        else:
            lookup = weights.as_dict()
            edges = _normalise(candidates)
            w = np.array([lookup[(int(u), int(v))] for u, v in edges], dtype=float)
    else:
        edges = _normalise(candidates)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(edges):
            raise ValueError(f"{len(w)} weights for {len(edges)} candidate edges")
    node_ids = tuple(range(nodes)) if isinstance(nodes, (int, np.integer)) else tuple(sorted(int(a) for a in nodes))
    index = {a: i for i, a in enumerate(node_ids)}
    for u, v in edges:
        if u not in index or v not in index:
            raise UnmeasuredNode(f"candidate edge ({u},{v}) leaves the node set")

    order = _sort_order(edges, w)
    ws = w[order]
    tie_count = int(np.count_nonzero(ws[1:] == ws[:-1])) if len(ws) > 1 else 0
    dsu = DisjointSetForest(len(node_ids))
    in_tree = np.zeros(len(edges), dtype=bool)
    need = len(node_ids) - 1
    picked = 0
    eu = [index[int(x)] for x in edges[:, 0]]
    ev = [index[int(x)] for x in edges[:, 1]]
    for i in order.tolist():
        if picked == need:
            break
        if dsu.union(eu[i], ev[i]):
            in_tree[i] = True
            picked += 1
    if picked < need:
        comps = [[node_ids[i] for i in g] for g in dsu.groups()]
        raise DisconnectedCandidates(
            f"candidate edges do not connect all nodes ({len(comps)} components)", comps)

    tree_idx = np.flatnonzero(in_tree)
    margins = _replacement_margins(len(node_ids), eu, ev, w, order, in_tree)
    chosen = sorted(tree_idx.tolist(), key=lambda i: (int(edges[i, 0]), int(edges[i, 1])))
    return LearnedTopology(
        edges=[(int(edges[i, 0]), int(edges[i, 1])) for i in chosen],
        weights=[float(w[i]) for i in chosen],
        margins=[margins[i] for i in chosen],
        total_weight=math.fsum(float(w[i]) for i in chosen),
        nodes=node_ids,
        tie_count=tie_count,
    )


def _replacement_margins(n, eu, ev, w, order, in_tree):
    """For each tree edge: lightest covering non-tree edge weight minus its own.

    Non-tree edges are processed in ascending weight; the first one whose
    tree path covers a tree edge is its cheapest replacement.  Covered
    edges are contracted with a jump pointer so each is visited once.
    """
    adj = [[] for _ in range(n)]
    for i in np.flatnonzero(in_tree).tolist():
        adj[eu[i]].append((ev[i], i))
        adj[ev[i]].append((eu[i], i))
    parent = [-1] * n
    up_edge = [-1] * n
    depth = [0] * n
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack = [s]
        while stack:
            x = stack.pop()
            for y, i in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    parent[y], up_edge[y], depth[y] = x, i, depth[x] + 1
                    stack.append(y)
    jump = list(range(n))

    def top(x):
        root = x
        while jump[root] != root:
            root = jump[root]
        while jump[x] != root:
            jump[x], x = root, jump[x]
        return root

    margins = {int(i): math.inf for i in np.flatnonzero(in_tree)}
    for i in order.tolist():
        if in_tree[i]:
            continue
        a, b = top(eu[i]), top(ev[i])
        while a != b:
            if depth[a] < depth[b]:
                a, b = b, a
            e = up_edge[a]
            margins[e] = float(w[i] - w[e])
            jump[a] = parent[a]
            a = top(a)
    return margins


def learn_structure(ms: MeasurementSet, candidates=None, nodes=None,
                    compare_complete: bool = False) -> LearnedTopology:
    """Learn the operational tree from potential samples.

    ``candidates`` defaults to every node pair.  ``nodes`` restricts the
    learner to a subset of measured nodes (for per-group learning).  With
    ``compare_complete`` the complete-graph tree is also computed and
    ``complete_graph_agrees`` records whether both agree.
    """
    node_ids = tuple(range(ms.node_count)) if nodes is None else tuple(sorted(nodes))
    if candidates is None:
        ids = np.asarray(node_ids, dtype=np.intp)
        candidates = ids[complete_graph(len(ids))]
    weights = edge_variances(ms, candidates)
    topo = kruskal_mst(node_ids, None, weights)
    if compare_complete:
        ids = np.asarray(node_ids, dtype=np.intp)
        full = kruskal_mst(node_ids, None, edge_variances(ms, ids[complete_graph(len(ids))]))
        topo.complete_graph_agrees = full.edge_set() == topo.edge_set()
    return topo


def _correlation(X):
    Xc = X - X.mean(axis=0)
    ss = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    with np.errstate(invalid="ignore", divide="ignore"):
        C = (Xc.T @ Xc) / np.outer(ss, ss)
    return np.nan_to_num(C, nan=0.0), ss > 0


def group_components(ms: MeasurementSet, threshold: float = DEFAULT_GROUP_THRESHOLD,
                     candidates=None, references: Optional[Sequence[int]] = None) -> list:
    """Partition nodes into one group per operational tree.

    Nodes ``a`` and ``b`` are linked when ``|corr(pi_a, pi_b)| >= threshold``.
    Reference nodes (``references``, or constant columns when not given)
    carry no correlation signal and are held out.  Branches hanging off the
    same reference share no flow and so are uncorrelated too; each
    correlated group is therefore attached to the reference it reaches by
    its lowest-weight candidate edge (every pair when ``candidates`` is
    None), which merges sibling branches back into one tree.  Groups with
    no candidate edge to a reference stay on their own.
    """
    X = ms.samples
    m, n = X.shape
    if m < 2:
        raise InsufficientSamples(f"correlation needs at least 2 samples, got {m}")
    dsu = DisjointSetForest(n)
    if threshold <= 0:
        for a in range(1, n):
            dsu.union(0, a)
        return dsu.groups()
    C, varying = _correlation(X)
    refs = set(range(n)) - set(np.flatnonzero(varying).tolist()) if references is None else set(references)
    ii, jj = np.nonzero(np.triu(np.abs(C) >= threshold, k=1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        if a in refs or b in refs:
            continue
        dsu.union(a, b)
    if not refs or len(refs) == n:
        return dsu.groups()
    pairs = complete_graph(n) if candidates is None else _normalise(candidates)
    is_ref = np.zeros(n, dtype=bool)
    is_ref[list(refs)] = True
    links = pairs[is_ref[pairs[:, 0]] != is_ref[pairs[:, 1]]]
    if len(links) == 0:
        return dsu.groups()
    weights = edge_variances(ms, links).weights
    best = {}
    for (u, v), wt in zip(links.tolist(), weights.tolist()):
        r, other = (u, v) if is_ref[u] else (v, u)
        g = dsu.find(other)
        if g not in best or (wt, r) < best[g][0]:
            best[g] = ((wt, r), other)
    for (_, r), other in best.values():
        dsu.union(r, other)
    return dsu.groups()


def learn_forest(ms: MeasurementSet, candidates=None, threshold: float = DEFAULT_GROUP_THRESHOLD,
                 references: Optional[Sequence[int]] = None) -> list:
    """Group nodes by correlation, then learn one tree per group."""
    groups = group_components(ms, threshold, candidates, references)
    pairs = None if candidates is None else _normalise(candidates)
    out = []
    for g in groups:
        if len(g) == 1:
            out.append(LearnedTopology([], [], [], 0.0, tuple(g)))
            continue
        if pairs is None:
            cand = None
        else:
            members = np.zeros(ms.node_count, dtype=bool)
            members[g] = True
            cand = pairs[members[pairs[:, 0]] & members[pairs[:, 1]]]
        out.append(learn_structure(ms, cand, nodes=g))
    return out


def merge_topologies(parts: Iterable[LearnedTopology]) -> LearnedTopology:
    edges, weights, margins, nodes = [], [], [], []
    ties = 0
    for p in parts:
        edges += p.edges
        weights += p.weights
        margins += p.margins
        nodes += list(p.nodes)
        ties += p.tie_count
    order = sorted(range(len(edges)), key=lambda i: edges[i])
    return LearnedTopology([edges[i] for i in order], [weights[i] for i in order],
                           [margins[i] for i in order], math.fsum(weights),
                           tuple(sorted(nodes)), ties)
