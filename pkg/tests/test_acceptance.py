"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (also collected into the
terminal summary).  Run on its own with::

    pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from radialflow.cli import main as cli_main
from radialflow.estimator import estimate_injections, recover_flows, recover_injections
from radialflow.experiments import ExperimentConfig, default_model, gen_network, run_sweep
from radialflow.learner import edge_variances, kruskal_mst, learn_structure
from radialflow.network import descendants, validate_radial
from radialflow.oracles import (FAIL, PASS, brute_force_mst, positive_correlation_check,
                                pqd_empirical_check)
from radialflow.simulator import MeasurementSet, edge_specs, simulate
from radialflow.verify import random_check_network, random_weighted_graph, recovery_check

CHECK_NETWORKS = 100
CHECK_MC_SAMPLES = 10 ** 6
CHECK_BUDGET_S = 120.0
RECOVERY_BUDGET_S = 60.0
SPEED_BUDGET_S = 5.0
SPEED_RATIO_MAX = 2.6


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


@pytest.fixture(scope="module")
def check_runs():
    t0 = time.perf_counter()
    runs = [recovery_check(random_check_network(i), i, CHECK_MC_SAMPLES) for i in range(CHECK_NETWORKS)]
    return runs, time.perf_counter() - t0


def test_c1_exact_weight_recovery(check_runs):
    runs, elapsed = check_runs
    recovered = sum(r["recovered"] for r in runs)
    mc = sum(r["provenance"] == "monte-carlo" for r in runs)
    reruns = sum(r["attempts"] > 1 for r in runs)
    ok = recovered == CHECK_NETWORKS and elapsed < CHECK_BUDGET_S
    assert report(1, ok, f"MST over oracle weights recovers {recovered}/{CHECK_NETWORKS} trees "
                         f"({mc} Monte-Carlo, {reruns} re-run) in {elapsed:.1f}s (budget {CHECK_BUDGET_S:.0f}s)")


def test_c2_ordering(check_runs):
    runs, _ = check_runs
    triples = sum(r["ordering"]["triples"] for r in runs)
    violations = sum(len(r["ordering"]["violations"]) for r in runs)
    unresolved = sum(r["ordering"]["verdict"] != PASS for r in runs)
    exact_res = max((r["ordering"]["case3_max_residual"] for r in runs if r["provenance"] == "exact-linear"),
                    default=0.0)
    ok = violations == 0 and unresolved == 0
    assert report(2, ok, f"{violations} ordering violations over {triples} triples "
                         f"({unresolved} networks not clean); exact meeting-point residual {exact_res:.1e}")


def _recovery(family, n):
    cfg = ExperimentConfig(nodes=n, fictitious=n, family=family, sample_counts=[200, 400],
                           trials=50, seed=0, network_seed=0)
    rep = run_sweep(cfg)
    perfect = float(np.mean(np.asarray(rep.trial_errors[(400, 0.0)]) == 0))
    return perfect, rep.row(200, 0.0).mean_err


def test_c3_noise_free_recovery():
    t0 = time.perf_counter()
    results = {fam: _recovery(fam, n) for fam, n in (("linear", 30), ("quadratic", 25))}
    elapsed = time.perf_counter() - t0
    ok = elapsed < RECOVERY_BUDGET_S
    parts = []
    for fam, (perfect, mean200) in results.items():
        ok &= perfect >= 0.95 and mean200 < 0.02
        parts.append(f"{fam}: {perfect:.0%} perfect at m=400, mean error {mean200:.4f} at m=200")
    assert report(3, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def _noisy(family, n):
    cfg = ExperimentConfig(nodes=n, fictitious=n, family=family, sample_counts=[100, 400, 1600],
                           noise_fractions=[0.05, 0.08, 0.1], trials=50, seed=0)
    return run_sweep(cfg)


def test_c4_noisy_trend():
    ok = True
    parts = []
    for fam, n in (("linear", 30), ("quadratic", 25)):
        rep = _noisy(fam, n)
        rhos = [0.05, 0.08, 0.1]
        for rho in rhos:
            lo, hi = rep.row(1600, rho).mean_err, rep.row(100, rho).mean_err
            ok &= lo < hi
        rows = [rep.row(400, rho) for rho in rhos]
        for a, b in zip(rows, rows[1:]):
            pooled = np.hypot(a.std_err / np.sqrt(a.trials), b.std_err / np.sqrt(b.trials))
            ok &= b.mean_err >= a.mean_err - pooled
        parts.append(f"{fam} m=100->1600 " + ", ".join(
            f"{rep.row(100, r).mean_err:.3f}->{rep.row(1600, r).mean_err:.3f}" for r in rhos)
            + " | m=400 by rho " + ", ".join(f"{x.mean_err:.3f}" for x in rows))
    assert report(4, ok, "; ".join(parts))


def test_c5_kruskal_vs_brute_force():
    rng = np.random.default_rng(2024)
    matches = 0
    for _ in range(200):
        n, edges, w = random_weighted_graph(rng, 8)
        matches += kruskal_mst(n, edges, w).total_weight == brute_force_mst(n, edges, w).min_weight
    assert report(5, matches == 200, f"Kruskal total weight equals brute force on {matches}/200 graphs (n<=8)")


def _pqd_pairs(rng, m):
    g = lambda: rng.standard_normal(m)
    u = lambda: rng.uniform(-1, 1, m)
    e = lambda: rng.exponential(1.0, m)
    mix = lambda: np.where(rng.random(m) < 0.5, rng.normal(-2, 0.5, m), rng.exponential(2.0, m))
    return {
        "gauss+gauss": (g(), g()),
        "gauss+uniform": (g(), u()),
        "uniform+gauss": (u(), g()),
        "uniform+uniform": (u(), u()),
        "exp+exp": (e(), e()),
        "exp+gauss": (e(), 3 * g()),
        "gauss+exp": (g(), -e()),
        "uniform+exp": (u(), e()),
        "mix+gauss": (mix(), g()),
        "exp+mix": (e(), mix()),
    }


def test_c6_pqd():
    rng = np.random.default_rng(6)
    m = 10 ** 5
    results = {k: pqd_empirical_check(x, y, grid=9) for k, (x, y) in _pqd_pairs(rng, m).items()}
    x = rng.standard_normal(m)
    control = pqd_empirical_check(x, -2 * x + 0.5 * rng.standard_normal(m), grid=9)
    passed = sum(r.verdict == PASS for r in results.values())
    worst = min(r.worst_margin_over_eps for r in results.values())
    ok = passed == len(results) and control.verdict == FAIL
    assert report(6, ok, f"{passed}/{len(results)} independent pairs PQD on 9x9 grid "
                         f"(worst margin {worst:+.2f} eps); negative control flagged "
                         f"with {control.violations} violations")


def test_c7_positive_correlation():
    rng = np.random.default_rng(7)
    positive = 0
    smallest = np.inf
    for t in range(50):
        g = gen_network("random-radial", 10, 0, "quadratic", seed=t % 10)
        tree = validate_radial(g)
        specs = edge_specs(g, tree)
        members = np.arange(1, 10)
        v2 = sorted(rng.choice(members, size=int(rng.integers(2, 10)), replace=False).tolist())
        v1 = sorted(rng.choice(v2, size=int(rng.integers(1, len(v2) + 1)), replace=False).tolist())
        i, j = rng.choice(members, size=2)
        rep = positive_correlation_check(default_model(g, t), v1, v2, specs[i], specs[j], 10 ** 4, seed=t)
        positive += rep.verdict == PASS
        smallest = min(smallest, rep.z / rep.stderr)
    assert report(7, positive == 50, f"{positive}/50 nested-set correlations positive at 3 sigma "
                                     f"(smallest z-score {smallest:.1f})")


def test_c8_estimator_round_trip():
    g = gen_network("random-radial", 25, 25, "gas", seed=8, compressor_prob=0.3)
    model = default_model(g, 8)
    sim = simulate(g, model, 10 ** 5, seed=8)
    tree = sim.trees[0]
    P = recover_injections(tree, recover_flows(tree, g, sim.measurements))
    max_abs = float(np.max(np.abs(P - sim.injections[:, :, 0])))
    est = estimate_injections(tree, g, sim.measurements)
    rel = float(np.max(np.abs(est.var[1:] / model.var[1:, 0] - 1)))
    ok = max_abs <= 1e-8 and rel < 0.10
    assert report(8, ok, f"injection samples max error {max_abs:.1e} (tol 1e-8); "
                         f"variance max relative error {rel:.3f} (tol 0.10)")


def _timed_learn(ms, cands, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        learn_structure(ms, cands)
        best = min(best, time.perf_counter() - t0)
    return best


def _candidates(n, count, rng):
    chain = {(i, i + 1) for i in range(n - 1)}
    iu, iv = np.triu_indices(n, k=1)
    pool = rng.permutation(len(iu))
    out = set(chain)
    for k in pool:
        if len(out) == count:
            break
        out.add((int(iu[k]), int(iv[k])))
    return np.array(sorted(out))


def test_c9_learner_scaling():
    rng = np.random.default_rng(9)
    n, m = 2000, 200
    ms = MeasurementSet(rng.standard_normal((m, n)).cumsum(axis=1))
    small = _candidates(n, 20000, rng)
    large = _candidates(n, 40000, rng)
    t_small = _timed_learn(ms, small)
    t_large = _timed_learn(ms, large)
    ratio = t_large / t_small
    ok = t_small < SPEED_BUDGET_S and ratio < SPEED_RATIO_MAX
    assert report(9, ok, f"n=2000, E=20000, m=200 learned in {t_small:.3f}s (budget {SPEED_BUDGET_S:.0f}s); "
                         f"E=40000 takes {t_large:.3f}s, ratio {ratio:.2f} (limit {SPEED_RATIO_MAX})")


def test_c10_sweep_determinism(tmp_path):
    args = ["sweep", "--nodes", "30", "--fictitious", "30", "--samples", "25,50,100,200,400",
            "--noise", "0,0.05", "--trials", "10", "--seed", "42"]
    assert cli_main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    b = (tmp_path / "b" / "sweep.csv").read_bytes()
    same = a == b and (tmp_path / "a" / "sweep_trials.csv").read_bytes() == \
        (tmp_path / "b" / "sweep_trials.csv").read_bytes()
    assert report(10, same, f"two sweep runs with seed 42 give byte-identical CSV ({len(a)} bytes, "
                            f"{len(a.splitlines()) - 1} rows)")
