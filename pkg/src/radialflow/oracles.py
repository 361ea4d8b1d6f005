"""Independent reference computations used to validate the learner.

Nothing here shares code paths with :mod:`radialflow.learner`: exact
variances are assembled from edge-flow covariances, spanning trees are
enumerated exhaustively, and the dependence checks work on raw samples.

Statistical checks return a tri-state verdict: ``"pass"``, ``"fail"`` or
``"inconclusive"`` (the effect is within the 3-sigma noise band).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NonlinearSpec, TooLarge, ValidationError
from .flowmodel import FlowFunctionSpec, eval_g
from .network import RadialTree, descendant_matrix, path_matrix, tree_path
from .simulator import InjectionModel, reference_injections, sample_injections, solve_flows, solve_potentials

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
SIGMAS = 3.0


@dataclass(eq=False)
class PhiTable:
    values: np.ndarray
    provenance: str
    stderr: Optional[np.ndarray] = None
    m: Optional[int] = None

    def __getitem__(self, ab):
        return self.values[ab]

    def to_dict(self) -> dict:
        out = {"provenance": self.provenance, "values": self.values.tolist()}
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
            out["m"] = self.m
        return out


def _coeff_matrix(tree, specs, k):
    n = tree.node_count
    c = np.zeros((k, n))
    for a in tree.order:
        if a == tree.root:
            continue
        spec = specs[a]
        if spec is None or not spec.is_linear:
            raise NonlinearSpec(f"edge leaving node {a} is not linear ({getattr(spec, 'family', None)})")
        c[:spec.commodities, a] = spec.coeffs[:k]
    return c


def edge_covariance_linear(tree: RadialTree, variances, specs) -> np.ndarray:
    """Covariance between the drops ``g_r(f_r)`` and ``g_s(f_s)`` of every edge pair.

    Edge ``r`` carries the sum of injections over its subtree, so two edges
    share exactly the injections of nodes descending from both.
    """
    var = np.asarray(variances, dtype=float)
    if var.ndim == 1:
        var = var[:, None]
    k = var.shape[1]
    var = var.copy()
    var[tree.root] = 0.0
    c = _coeff_matrix(tree, specs, k)
    D = descendant_matrix(tree).astype(float)
    omega = np.zeros((tree.node_count, tree.node_count))
    for i in range(k):
        shared = (D * var[:, i]) @ D.T
        omega += np.outer(c[i], c[i]) * shared
    return omega


def exact_phi_linear(tree: RadialTree, variances, specs) -> PhiTable:
    """Exact variance of every potential difference on a linear network.

    Assembled pair by pair as the sum of drop covariances over the two
    path sections that differ (same-side terms minus twice the cross term).
    """
    omega = edge_covariance_linear(tree, variances, specs)
    R = path_matrix(tree).astype(float)
    U = R[:, None, :] - R[None, :, :]
    phi = np.einsum("abr,rs,abs->ab", U, omega, U)
    phi = 0.5 * (phi + phi.T)
    np.fill_diagonal(phi, 0.0)
    return PhiTable(np.maximum(phi, 0.0), "exact-linear")


def phi_terms_linear(tree: RadialTree, variances, specs, a: int, b: int) -> dict:
    """The three pieces of ``phi_ab``: a-side, b-side and the cross covariance.

    ``phi_ab = a_side + b_side - 2 * cross``.
    """
    omega = edge_covariance_linear(tree, variances, specs)
    R = path_matrix(tree)
    only_a = np.flatnonzero(R[a] & ~R[b])
    only_b = np.flatnonzero(R[b] & ~R[a])
    a_side = float(omega[np.ix_(only_a, only_a)].sum())
    b_side = float(omega[np.ix_(only_b, only_b)].sum())
    cross = float(omega[np.ix_(only_b, only_a)].sum())
    return {"a_side": a_side, "b_side": b_side, "cross": cross, "phi": a_side + b_side - 2 * cross}


def monte_carlo_phi(tree: RadialTree, model: InjectionModel, specs, m: int, seed: int,
                    batches: int = 50, chunk: int = 1 << 17) -> PhiTable:
    """Sample estimate of every ``phi_ab`` from a fresh noise-free simulation.

    Standard errors come from batch means over ``batches`` equal batches.
    """
    n = tree.node_count
    batches = max(2, min(batches, m // 2))
    bounds = np.linspace(0, m, batches + 1).astype(int)
    total_n = 0
    mean = np.zeros(n)
    cross = np.zeros((n, n))
    per_batch = []
    for b in range(batches):
        lo, hi = bounds[b], bounds[b + 1]
        size = hi - lo
        bm = np.zeros(n)
        bc = np.zeros((n, n))
        bn = 0
        for s in range(0, size, chunk):
            cnt = min(chunk, size - s)
            P = sample_injections(model, cnt, _chunk_seed(seed, b, s))
            P = reference_injections(tree, P)
            pi = solve_potentials(tree, solve_flows(tree, P), specs, 0.0)
            cm = pi.mean(axis=0)
            cc = (pi - cm).T @ (pi - cm)
            bc, bm, bn = _merge(bc, bm, bn, cc, cm, cnt)
        cov = bc / (bn - 1)
        d = np.diag(cov)
        per_batch.append(d[:, None] + d[None, :] - 2 * cov)
        cross, mean, total_n = _merge(cross, mean, total_n, bc, bm, bn)
    cov = cross / (total_n - 1)
    d = np.diag(cov)
    phi = np.maximum(d[:, None] + d[None, :] - 2 * cov, 0.0)
    np.fill_diagonal(phi, 0.0)
    se = np.std(np.stack(per_batch), axis=0, ddof=1) / math.sqrt(batches)
    return PhiTable(phi, "monte-carlo", se, m)


def _chunk_seed(seed, batch, offset):
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(batch, offset)).generate_state(1)[0])


def _merge(c1, m1, n1, c2, m2, n2):
    n = n1 + n2
    if n1 == 0:
        return c2.copy(), m2.copy(), n2
    delta = m2 - m1
    mean = m1 + delta * (n2 / n)
    c = c1 + c2 + np.outer(delta, delta) * (n1 * n2 / n)
    return c, mean, n


@dataclass
class OrderingReport:
    triples: int
    violations: list = field(default_factory=list)
    inconclusive: list = field(default_factory=list)
    case3_max_residual: float = 0.0

    @property
    def verdict(self) -> str:
        if self.violations:
            return FAIL
        return INCONCLUSIVE if self.inconclusive else PASS

    def to_dict(self) -> dict:
        return {"triples": self.triples, "violations": self.violations,
                "inconclusive": self.inconclusive, "case3_max_residual": self.case3_max_residual,
                "verdict": self.verdict}


def check_ordering(tree: RadialTree, phi: PhiTable, sigmas: float = SIGMAS) -> OrderingReport:
    """Check ``phi_ab < phi_ac`` for every ``b`` strictly inside the path ``a .. c``.

    With Monte-Carlo provenance a reversal is only a violation when it
    exceeds ``sigmas`` combined standard errors; smaller reversals are
    reported as inconclusive.  For triples where ``b`` is the meeting point
    of both root paths, the largest ``|phi_ac - phi_ab - phi_cb|`` is
    recorded (zero up to rounding for exact tables).
    """
    V = phi.values
    se = phi.stderr
    D = descendant_matrix(tree)
    nodes = list(tree.order)
    rep = OrderingReport(0)
    for a, c in itertools.permutations(nodes, 2):
        path = tree_path(tree, a, c)
        for b in path[1:-1]:
            rep.triples += 1
            gap = V[a, c] - V[a, b]
            if D[b, a] and D[b, c]:
                rep.case3_max_residual = max(rep.case3_max_residual, abs(V[a, c] - V[a, b] - V[c, b]))
            if gap > 0:
                continue
            slack = 0.0 if se is None else sigmas * math.hypot(se[a, b], se[a, c])
            item = (int(a), int(b), int(c), float(gap))
            if -gap > slack or se is None:
                rep.violations.append(item)
            else:
                rep.inconclusive.append(item)
    return rep


def spanning_tree_count(n: int, candidates) -> int:
    """Number of spanning trees by the matrix-tree theorem."""
    L = np.zeros((n, n))
    for u, v in candidates:
        L[u, u] += 1
        L[v, v] += 1
        L[u, v] -= 1
        L[v, u] -= 1
    if n == 1:
        return 1
    return int(round(np.linalg.det(L[1:, 1:])))


@dataclass
class BruteForceResult:
    min_weight: float
    trees: list
    count: int


def brute_force_mst(n: int, candidates, weights, max_nodes: int = 9,
                    max_trees: int = 10 ** 5) -> BruteForceResult:
    """Enumerate every spanning tree; return the minimum weight and all optimal trees.

    Edges are decided one at a time (include if it closes no cycle,
    exclude if the rest can still span), so only spanning trees are ever
    completed.
    """
    pairs = [(min(int(u), int(v)), max(int(u), int(v))) for u, v in candidates]
    w = [float(x) for x in weights]
    if len(w) != len(pairs):
        raise ValidationError(f"{len(w)} weights for {len(pairs)} edges")
    if n > max_nodes:
        raise TooLarge(f"{n} nodes exceeds the brute-force limit of {max_nodes}")
    count = spanning_tree_count(n, pairs)
    if count > max_trees:
        raise TooLarge(f"{count} spanning trees exceeds the limit of {max_trees}")
    if count == 0:
        raise ValidationError("candidate graph has no spanning tree")

    found = []

    def find(par, x):
        while par[x] != x:
            x = par[x]
        return x

    def spans(par, start):
        par = par[:]
        comps = sum(1 for x in range(n) if par[x] == x)
        for j in range(start, len(pairs)):
            ru, rv = find(par, pairs[j][0]), find(par, pairs[j][1])
            if ru != rv:
                par[ru] = rv
                comps -= 1
        return comps == 1

    def rec(i, par, chosen):
        if len(chosen) == n - 1:
            found.append(tuple(chosen))
            return
        if i == len(pairs):
            return
        u, v = pairs[i]
        ru, rv = find(par, u), find(par, v)
        if ru != rv:
            nxt = par[:]
            nxt[ru] = rv
            rec(i + 1, nxt, chosen + [i])
        if spans(par, i + 1):
            rec(i + 1, par, chosen)

    rec(0, list(range(n)), [])
    totals = [math.fsum(w[i] for i in t) for t in found]
    best = min(totals)
    trees = [frozenset(pairs[i] for i in t) for t, tot in zip(found, totals) if tot == best]
    return BruteForceResult(best, trees, len(found))


@dataclass
class PQDReport:
    violations: int
    worst_margin: float
    worst_margin_over_eps: float
    grid: int
    m: int

    @property
    def verdict(self) -> str:
        return FAIL if self.violations else PASS

    def to_dict(self) -> dict:
        return {"violations": self.violations, "worst_margin": self.worst_margin,
                "worst_margin_over_eps": self.worst_margin_over_eps, "grid": self.grid,
                "m": self.m, "verdict": self.verdict}


def pqd_empirical_check(x, y, grid: int = 9, sigmas: float = SIGMAS) -> PQDReport:
    """Test positive quadrant dependence of ``X`` and ``X + Y`` on a quantile grid.

    At each grid point ``(s, t)`` the margin is
    ``P(X <= s, X + Y <= t) - P(X <= s) P(X + Y <= t)``; a violation is a
    margin below minus ``sigmas`` binomial standard errors of the product.
    """
    x = np.asarray(x, dtype=float)
    z = x + np.asarray(y, dtype=float)
    m = x.size
    levels = np.arange(1, grid + 1) / (grid + 1)
    qs = np.quantile(x, levels)
    qt = np.quantile(z, levels)
    below_x = x[None, :] <= qs[:, None]
    below_z = z[None, :] <= qt[:, None]
    ps = below_x.mean(axis=1)
    pt = below_z.mean(axis=1)
    joint = (below_x.astype(np.float64) @ below_z.T.astype(np.float64)) / m
    prod = np.outer(ps, pt)
    margin = joint - prod
    eps = sigmas * np.sqrt(np.maximum(prod * (1 - prod), 1e-300) / m)
    return PQDReport(int(np.count_nonzero(margin < -eps)), float(margin.min()),
                     float((margin / eps).min()), grid, m)


@dataclass
class CorrelationReport:
    r: float
    z: float
    stderr: float
    m: int

    @property
    def verdict(self) -> str:
        if self.z > SIGMAS * self.stderr:
            return PASS
        if self.z < -SIGMAS * self.stderr:
            return FAIL
        return INCONCLUSIVE

    def to_dict(self) -> dict:
        return {"r": self.r, "z": self.z, "stderr": self.stderr, "m": self.m, "verdict": self.verdict}


def correlation_report(u, v) -> CorrelationReport:
    """Pearson correlation with a Fisher-z standard error."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = u.size
    r = float(np.corrcoef(u, v)[0, 1])
    r = min(max(r, -1 + 1e-15), 1 - 1e-15)
    return CorrelationReport(r, float(np.arctanh(r)), 1.0 / math.sqrt(m - 3), m)


def positive_correlation_check(model: InjectionModel, v1: Sequence[int], v2: Sequence[int],
                               g1: FlowFunctionSpec, g2: FlowFunctionSpec, m: int, seed: int,
                               commodity: int = 0, require_nested: bool = True) -> CorrelationReport:
    """Correlation of ``g1(P_V1)`` and ``g2(P_V2)`` for injection totals over node sets.

    Nested sets ``V1 ⊆ V2`` should give a significantly positive result.
    Pass ``require_nested=False`` to run other set pairs as controls.
    """
    s1, s2 = set(v1), set(v2)
    if not s1 or not s2:
        raise ValidationError("node sets must be nonempty")
    if require_nested and not s1 <= s2:
        raise ValidationError(f"{sorted(s1)} is not a subset of {sorted(s2)}")
    P = sample_injections(model, m, seed)[:, :, commodity]
    t1 = P[:, sorted(s1)].sum(axis=1)
    t2 = P[:, sorted(s2)].sum(axis=1)
    return correlation_report(eval_g(g1, t1[:, None]), eval_g(g2, t2[:, None]))
