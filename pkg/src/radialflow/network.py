"""Candidate graphs, radial validation and tree combinatorics.

Nodes are dense integers ``0..n-1``.  A :class:`NetworkGraph` holds the
loopy set of permissible edges, each tagged with its flow function and
whether it is operational.  :func:`validate_radial` orients the operational
edges toward the reference node and returns a :class:`RadialTree`; every
other module works from that parent-map representation.

Tree edges are named by their child node: edge ``a`` is the edge from ``a``
to ``parent[a]``.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (CycleDetected, Disconnected, InvalidSpec, SchemaError,
                     UnknownNode, ValidationError, WrongEdgeCount)
from .flowmodel import FlowFunctionSpec, is_monotone


@dataclass(frozen=True)
class CandidateEdge:
    u: int
    v: int
    flow: FlowFunctionSpec
    operational: bool = False

    @property
    def key(self) -> tuple:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


@dataclass(frozen=True)
class NetworkGraph:
    node_count: int
    reference: int
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        n = self.node_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValidationError(f"node_count must be a positive integer, got {n!r}")
        if not 0 <= self.reference < n:
            raise UnknownNode(f"reference {self.reference} outside 0..{n - 1}")
        seen = set()
        for e in self.edges:
            for x in (e.u, e.v):
                if not 0 <= x < n:
                    raise UnknownNode(f"edge ({e.u},{e.v}) names node {x} outside 0..{n - 1}")
            if e.u == e.v:
                raise ValidationError(f"self-loop at node {e.u}")
            if e.key in seen:
                raise ValidationError(f"duplicate edge {e.key}")
            seen.add(e.key)
            report = is_monotone(e.flow)
            if not report.monotone:
                raise InvalidSpec(f"edge {e.key} flow function is not monotone (witness {report.witness})")
        if n > 1:
            comps = _components(n, [e.key for e in self.edges])
            if len(comps) > 1:
                stray = min(min(c) for c in comps if self.reference not in c)
                raise Disconnected(f"candidate graph is disconnected; node {stray} "
                                   f"is not reachable from {self.reference}", node=stray)

    @property
    def operational_edges(self) -> list:
        return [e for e in self.edges if e.operational]

    def candidate_pairs(self) -> list:
        return [e.key for e in self.edges]

    def operational_pairs(self) -> set:
        return {e.key for e in self.edges if e.operational}

    def edge_index(self) -> dict:
        return {e.key: i for i, e in enumerate(self.edges)}

    def spec_for(self, a, b) -> FlowFunctionSpec:
        key = (a, b) if a < b else (b, a)
        for e in self.edges:
            if e.key == key:
                return e.flow
        raise KeyError(key)

    def to_dict(self) -> dict:
        return {
            "nodes": int(self.node_count),
            "reference": int(self.reference),
            "edges": [
                {"u": int(e.u), "v": int(e.v), "operational": bool(e.operational), "flow": e.flow.to_dict()}
                for e in self.edges
            ],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_TOP_FIELDS = {"nodes", "reference", "edges"}
_EDGE_FIELDS = {"u", "v", "operational", "flow"}


def network_from_dict(data) -> NetworkGraph:
    if not isinstance(data, dict):
        raise SchemaError("network document must be a JSON object")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        raise SchemaError(f"unknown network fields: {sorted(unknown)}")
    missing = _TOP_FIELDS - set(data)
    if missing:
        raise SchemaError(f"missing network fields: {sorted(missing)}")
    if not isinstance(data["edges"], list):
        raise SchemaError("'edges' must be a list")
    edges = []
    for i, raw in enumerate(data["edges"]):
        if not isinstance(raw, dict):
            raise SchemaError(f"edge #{i} must be an object")
        unknown = set(raw) - _EDGE_FIELDS
        if unknown:
            raise SchemaError(f"edge #{i}: unknown fields {sorted(unknown)}")
        if not {"u", "v", "flow"} <= set(raw):
            raise SchemaError(f"edge #{i}: needs 'u', 'v' and 'flow'")
        op = raw.get("operational", False)
        if not isinstance(op, bool):
            raise SchemaError(f"edge #{i}: 'operational' must be a boolean")
        u, v = raw["u"], raw["v"]
        if not (isinstance(u, int) and isinstance(v, int)) or isinstance(u, bool) or isinstance(v, bool):
            raise SchemaError(f"edge #{i}: endpoints must be integers")
        edges.append(CandidateEdge(u, v, FlowFunctionSpec.from_dict(raw["flow"]), op))
    n, ref = data["nodes"], data["reference"]
    if not isinstance(n, int) or not isinstance(ref, int):
        raise SchemaError("'nodes' and 'reference' must be integers")
    return NetworkGraph(n, ref, tuple(edges))


def load_network(path) -> NetworkGraph:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return network_from_dict(data)


def save_network(graph: NetworkGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n")


def _components(n, pairs):
    adj = [[] for _ in range(n)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, stack = [s], [s]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    comp.append(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


@dataclass(frozen=True, eq=False)
class RadialTree:
    """Operational tree oriented toward ``root``.

    Arrays are indexed by global node id.  Nodes outside this tree (possible
    when the tree is one component of a forest) have ``parent == -1`` and
    ``depth == -1``; so does the root.
    """

    node_count: int
    root: int
    parent: tuple
    edge_of: tuple
    depth: tuple
    children: tuple
    order: tuple

    @property
    def nodes(self) -> tuple:
        return self.order

    def __contains__(self, a) -> bool:
        return 0 <= a < self.node_count and (a == self.root or self.parent[a] >= 0)

    @property
    def edges(self) -> list:
        """Tree edges as ``(child, parent)`` pairs, sorted by child."""
        return [(a, self.parent[a]) for a in sorted(self.order) if a != self.root]

    def edge_pairs(self) -> set:
        return {(min(a, b), max(a, b)) for a, b in self.edges}

    def parent_array(self) -> np.ndarray:
        return np.asarray(self.parent, dtype=np.intp)

    def check(self, a) -> None:
        if a not in self:
            raise UnknownNode(f"node {a} is not in the tree rooted at {self.root}")


def _build_tree(n, root, adj, edge_ids):
    parent = [-1] * n
    edge_of = [-1] * n
    depth = [-1] * n
    children = [[] for _ in range(n)]
    depth[root] = 0
    order = [root]
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in sorted(adj[x]):
            if y == parent[x] or (y == root):
                continue
            if depth[y] >= 0:
                raise CycleDetected(f"operational edges form a cycle through ({x},{y})")
            parent[y] = x
            edge_of[y] = edge_ids[(min(x, y), max(x, y))]
            depth[y] = depth[x] + 1
            children[x].append(y)
            order.append(y)
            queue.append(y)
    return RadialTree(n, root, tuple(parent), tuple(edge_of), tuple(depth),
                      tuple(tuple(c) for c in children), tuple(order))


def _operational_adjacency(graph):
    n = graph.node_count
    adj = [[] for _ in range(n)]
    ids = {}
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, e in enumerate(graph.edges):
        if not e.operational:
            continue
        ru, rv = find(e.u), find(e.v)
        if ru == rv:
            raise CycleDetected(f"operational edge {e.key} closes a cycle")
        parent[ru] = rv
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
        ids[e.key] = i
    return adj, ids


def validate_radial(graph: NetworkGraph) -> RadialTree:
    """Orient the operational edges into a spanning tree rooted at the reference.

    Raises :class:`WrongEdgeCount` if there are more than ``n - 1``
    operational edges, :class:`CycleDetected` if they contain a cycle, and
    :class:`Disconnected` (naming the first unreachable node) if they do not
    span every node.
    """
    n = graph.node_count
    n_op = sum(e.operational for e in graph.edges)
    if n_op > n - 1:
        raise WrongEdgeCount(f"{n_op} operational edges, a spanning tree on {n} nodes has {n - 1}")
    adj, ids = _operational_adjacency(graph)
    tree = _build_tree(n, graph.reference, adj, ids)
    if len(tree.order) < n:
        reached = set(tree.order)
        stray = next(a for a in range(n) if a not in reached)
        raise Disconnected(f"node {stray} is not connected to reference {graph.reference} "
                           "by operational edges", node=stray)
    if n_op != n - 1:
        raise WrongEdgeCount(f"{n_op} operational edges, expected {n - 1}")
    return tree


def validate_forest(graph: NetworkGraph, references: Optional[Sequence[int]] = None) -> list:
    """Split the operational edges into one rooted tree per component.

    The component holding ``graph.reference`` is rooted there; other
    components are rooted at whichever of ``references`` they contain, or
    at their smallest node id.  Trees are returned in order of their root.
    """
    n = graph.node_count
    adj, ids = _operational_adjacency(graph)
    refs = set(references or ()) | {graph.reference}
    for r in refs:
        if not 0 <= r < n:
            raise UnknownNode(f"reference {r} outside 0..{n - 1}")
    trees = []
    for comp in _components(n, ids.keys()):
        roots = [r for r in comp if r in refs]
        if len(roots) > 1:
            raise ValidationError(f"component {comp} contains several references {roots}")
        root = roots[0] if roots else comp[0]
        trees.append(_build_tree(n, root, adj, ids))
    return sorted(trees, key=lambda t: t.root)


def path_to_reference(tree: RadialTree, a: int) -> list:
    """Edges ``(child, parent)`` from ``a`` up to the root, in walking order."""
    tree.check(a)
    path = []
    while a != tree.root:
        b = tree.parent[a]
        path.append((a, b))
        a = b
    return path


def descendants(tree: RadialTree, a: int) -> set:
    """Nodes whose path to the root passes through ``a`` (``a`` included)."""
    tree.check(a)
    out = {a}
    stack = [a]
    while stack:
        for c in tree.children[stack.pop()]:
            out.add(c)
            stack.append(c)
    return out


def descendant_matrix(tree: RadialTree) -> np.ndarray:
    """Boolean ``(n, n)`` matrix with ``D[a, c]`` true iff ``c`` descends from ``a``."""
    n = tree.node_count
    D = np.zeros((n, n), dtype=bool)
    for a in reversed(tree.order):
        D[a, a] = True
        for c in tree.children[a]:
            D[a] |= D[c]
    return D


def path_matrix(tree: RadialTree) -> np.ndarray:
    """Boolean ``(n, n)`` matrix with ``R[a, r]`` true iff edge ``r`` lies on ``a``'s root path.

    Edge ``r`` is the edge leaving node ``r`` toward its parent, so the root
    column is always false.
    """
    n = tree.node_count
    R = np.zeros((n, n), dtype=bool)
    for a in tree.order:
        if a == tree.root:
            continue
        p = tree.parent[a]
        R[a] = R[p]
        R[a, a] = True
    return R


class Incidence(NamedTuple):
    matrix: np.ndarray
    inverse: np.ndarray
    nodes: tuple


def reduced_incidence(tree: RadialTree) -> Incidence:
    """Reduced incidence matrix and its 0/1 inverse.

    Rows of ``matrix`` are tree edges and columns are non-root nodes, both
    in ascending child/node id order (``nodes``).  Edge ``(a, b)`` with
    parent ``b`` contributes ``+1`` at ``a`` and ``-1`` at ``b`` (dropped
    when ``b`` is the root).  The inverse is built directly from root
    paths: ``inverse[a, r] = 1`` iff edge ``r`` is on the path from ``a``.
    """
    nodes = tuple(sorted(a for a in tree.order if a != tree.root))
    pos = {a: i for i, a in enumerate(nodes)}
    k = len(nodes)
    M = np.zeros((k, k), dtype=np.int64)
    Minv = np.zeros((k, k), dtype=np.int64)
    for a in nodes:
        r = pos[a]
        M[r, r] = 1
        b = tree.parent[a]
        if b != tree.root:
            M[r, pos[b]] = -1
        for child, _ in path_to_reference(tree, a):
            Minv[r, pos[child]] = 1
    return Incidence(M, Minv, nodes)


def tree_path(tree: RadialTree, a: int, c: int) -> list:
    """Nodes on the tree path from ``a`` to ``c`` inclusive."""
    tree.check(a)
    tree.check(c)
    up_a, up_c = [a], [c]
    x, y = a, c
    while tree.depth[x] > tree.depth[y]:
        x = tree.parent[x]
        up_a.append(x)
    while tree.depth[y] > tree.depth[x]:
        y = tree.parent[y]
        up_c.append(y)
    while x != y:
        x, y = tree.parent[x], tree.parent[y]
        up_a.append(x)
        up_c.append(y)
    return up_a + up_c[-2::-1]
