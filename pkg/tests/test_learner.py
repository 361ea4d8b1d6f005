import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_graph
from radialflow.errors import DisconnectedCandidates, InsufficientSamples, UnmeasuredNode
from radialflow.experiments import default_model, gen_network
from radialflow.learner import (DisjointSetForest, LearnedTopology, edge_variances, group_components,
                                kruskal_mst, learn_forest, learn_structure, merge_topologies)
from radialflow.network import CandidateEdge, NetworkGraph, validate_radial
from radialflow.oracles import brute_force_mst, exact_phi_linear
from radialflow.simulator import InjectionModel, MeasurementSet, edge_specs, simulate
from radialflow.verify import random_weighted_graph


def test_dsu_basics():
    d = DisjointSetForest(5)
    assert d.components == 5
    assert d.union(0, 1) and d.components == 4
    assert not d.union(1, 0) and d.components == 4
    assert d.union(2, 3) and d.union(1, 3) and d.components == 2
    r = d.find(2)
    assert d.find(r) == r == d.find(0)
    assert d.connected(0, 2) and not d.connected(0, 4)
    assert d.groups() == [[0, 1, 2, 3], [4]]


@given(st.lists(st.tuples(st.integers(0, 19), st.integers(0, 19)), max_size=60))
def test_dsu_component_count(pairs):
    d = DisjointSetForest(20)
    for a, b in pairs:
        before = d.components
        joined = d.union(a, b)
        assert d.components == before - (1 if joined else 0)
        assert d.find(d.find(a)) == d.find(a)
    assert d.components == len(d.groups())


def test_constant_columns_zero_weight():
    ms = MeasurementSet(np.ones((10, 4)) * np.array([1, 2, 3, 4]))
    w = edge_variances(ms)
    assert np.all(w.weights == 0)


def test_hand_variance():
    ms = MeasurementSet(np.array([[1.0, 0.0], [3.0, 0.0]]))
    assert edge_variances(ms, [(0, 1)]).weight(1, 0) == 2.0


def test_variance_errors():
    with pytest.raises(InsufficientSamples):
        edge_variances(MeasurementSet(np.zeros((1, 3))))
    with pytest.raises(InsufficientSamples):
        learn_structure(MeasurementSet(np.zeros((1, 3))))
    with pytest.raises(UnmeasuredNode):
        edge_variances(MeasurementSet(np.zeros((4, 3))), [(0, 3)])


def test_weights_match_exact_linear():
    g = gen_network("random-radial", 8, 6, "linear", seed=3)
    tree = validate_radial(g)
    model = default_model(g, 3)
    ms = simulate(g, model, 10 ** 5, seed=4).measurements
    exact = exact_phi_linear(tree, model.var, edge_specs(g, tree)).values
    w = edge_variances(ms, g.candidate_pairs())
    X = ms.samples
    for (u, v), phi_hat in zip(w.edges.tolist(), w.weights):
        d = X[:, u] - X[:, v]
        # standard error of a sample variance
        se = np.sqrt(np.var((d - d.mean()) ** 2, ddof=1) / len(d))
        assert abs(phi_hat - exact[u, v]) < 3 * se
        assert phi_hat == pytest.approx(np.var(d, ddof=1), rel=1e-9)


def test_triangle():
    topo = kruskal_mst(3, [(0, 1), (1, 2), (0, 2)], [1.0, 2.0, 3.0])
    assert topo.edge_set() == {(0, 1), (1, 2)}
    assert topo.total_weight == 3.0
    assert topo.margins == [2.0, 1.0]


def test_kruskal_vs_brute_force_n7():
    rng = np.random.default_rng(7)
    done = 0
    while done < 200:
        n, edges, w = random_weighted_graph(rng, 7)
        if n != 7:
            continue
        done += 1
        topo = kruskal_mst(n, edges, w)
        bf = brute_force_mst(n, edges, w)
        assert topo.total_weight == bf.min_weight
        assert frozenset(topo.edge_set()) in bf.trees


def test_exact_weights_recover_tree():
    g = gen_network("random-radial", 10, 10, "linear", seed=11)
    tree = validate_radial(g)
    model = default_model(g, 0)
    phi = exact_phi_linear(tree, model.var, edge_specs(g, tree)).values
    pairs = g.candidate_pairs()
    topo = kruskal_mst(10, pairs, [phi[u, v] for u, v in pairs])
    assert topo.edge_set() == g.operational_pairs()
    assert all(mg >= 0 for mg in topo.margins)


def test_disconnected_candidates():
    with pytest.raises(DisconnectedCandidates) as exc:
        kruskal_mst(4, [(0, 1), (2, 3)], [1.0, 1.0])
    assert sorted(exc.value.components) == [[0, 1], [2, 3]]


def test_tie_breaking():
    edges = [(2, 3), (0, 1), (1, 2), (0, 3)]
    topo = kruskal_mst(4, edges, [1.0, 1.0, 1.0, 1.0])
    assert topo.edge_set() == {(0, 1), (0, 3), (1, 2)}
    assert topo.tie_count == 3
    again = kruskal_mst(4, list(reversed(edges)), [1.0] * 4)
    assert again.edge_set() == topo.edge_set()


def test_margins_against_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(40):
        n, edges, w = random_weighted_graph(rng, 7)
        topo = kruskal_mst(n, edges, w)
        wd = dict(zip(edges, w))
        for e, we, mg in zip(topo.edges, topo.weights, topo.margins):
            # cheapest non-tree edge reconnecting the two halves after removing e
            rest = topo.edge_set() - {e}
            d = DisjointSetForest(n)
            for a, b in rest:
                d.union(a, b)
            cross = [wd[x] for x in edges if x not in topo.edge_set() and not d.connected(*x)]
            want = min(cross) - we if cross else math.inf
            assert mg == pytest.approx(want, abs=1e-15) if cross else math.isinf(mg)


def test_learn_noise_free_30_node():
    g = gen_network("random-radial", 30, 30, "linear", seed=0)
    ms = simulate(g, default_model(g, 0), 500, seed=1).measurements
    assert learn_structure(ms, g.candidate_pairs()).edge_set() == g.operational_pairs()


def test_complete_graph_matches_candidates():
    g = gen_network("random-radial", 10, 8, "linear", seed=2)
    ms = simulate(g, default_model(g, 2), 2000, seed=2).measurements
    a = learn_structure(ms)
    b = learn_structure(ms, g.candidate_pairs(), compare_complete=True)
    assert a.edge_set() == b.edge_set() == g.operational_pairs()
    assert b.complete_graph_agrees is True


def test_permutation_invariance():
    g = gen_network("random-radial", 12, 10, "quadratic", seed=5)
    ms = simulate(g, default_model(g, 5), 3000, seed=5).measurements
    base = learn_structure(ms, g.candidate_pairs())
    perm = np.random.default_rng(1).permutation(12)
    inv = np.argsort(perm)
    # new column j holds old node perm[j]
    ms2 = MeasurementSet(ms.samples[:, perm])
    cands = [(int(inv[u]), int(inv[v])) for u, v in g.candidate_pairs()]
    moved = learn_structure(ms2, cands)
    mapped = {tuple(sorted((int(perm[u]), int(perm[v])))) for u, v in moved.edge_set()}
    assert mapped == base.edge_set()


def test_scale_invariance():
    g = gen_network("random-radial", 12, 10, "power-law", seed=6)
    ms = simulate(g, default_model(g, 6), 1000, seed=6).measurements
    k = 3.5
    a = edge_variances(ms, g.candidate_pairs())
    b = edge_variances(ms.scaled(k), g.candidate_pairs())
    assert np.allclose(b.weights, k * k * a.weights, rtol=1e-9)
    assert learn_structure(ms.scaled(k), g.candidate_pairs()).edge_set() == \
        learn_structure(ms, g.candidate_pairs()).edge_set()


def test_determinism_and_roundtrip():
    g = gen_network("random-radial", 12, 10, "mixed", seed=7)
    ms = simulate(g, default_model(g, 7), 400, seed=7).measurements
    a = learn_structure(ms, g.candidate_pairs())
    b = learn_structure(ms, g.candidate_pairs())
    assert a.to_dict() == b.to_dict()
    back = LearnedTopology.from_dict(a.to_dict())
    assert back.edge_set() == a.edge_set() and back.margins == a.margins


def test_single_group_and_zero_threshold():
    g = gen_network("random-radial", 10, 5, "linear", seed=1)
    ms = simulate(g, default_model(g, 1), 2000, seed=1).measurements
    assert len(group_components(ms, 0.1, g.candidate_pairs())) == 1
    assert group_components(ms, 0.0) == [list(range(10))]
    assert group_components(MeasurementSet(np.random.default_rng(0).normal(size=(50, 6))), 0.0) == \
        [list(range(6))]


def _two_trees():
    spec_edges = [(0, 1), (1, 2), (1, 3), (4, 5), (5, 6), (4, 7)]
    return make_graph(8, spec_edges, extra=[(3, 6), (2, 7), (0, 2)])


def test_two_trees_grouped():
    g = _two_trees()
    model = InjectionModel.random(8, references=(0, 4), seed=3)
    ms = simulate(g, model, 10 ** 4, seed=3, forest=True).measurements
    groups = group_components(ms, 0.2, g.candidate_pairs(), references=[0, 4])
    assert groups == [[0, 1, 2, 3], [4, 5, 6, 7]]
    # without explicit references constant columns are detected and attached
    assert group_components(ms, 0.2, g.candidate_pairs()) == [[0, 1, 2, 3], [4, 5, 6, 7]]
    merged = merge_topologies(learn_forest(ms, g.candidate_pairs(), 0.2, [0, 4]))
    assert merged.edge_set() == g.operational_pairs()
