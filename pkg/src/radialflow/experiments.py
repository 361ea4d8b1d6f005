"""Synthetic networks, topology scoring and seeded error sweeps.

A sweep fixes one network and one injection model, then for every
``(samples, noise fraction, trial)`` cell draws fresh injections,
simulates, learns and scores the learned tree.  Each cell's randomness is
derived from ``(seed, cell index)`` so results do not depend on execution
order or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SizeMismatch, TooManyFictitious, ValidationError
from .flowmodel import FlowFunctionSpec
from .learner import LearnedTopology, learn_structure
from .network import CandidateEdge, NetworkGraph, load_network
from .simulator import InjectionModel, NoiseSpec, simulate

TEMPLATES = ("chain", "star", "random-radial")
FAMILY_ALIASES = {
    "linear": "linear", "linear-multi": "linear", "lindistflow": "linear", "power": "linear",
    "quadratic": "quadratic", "quadratic-boost": "quadratic", "gas": "quadratic",
    "power-law": "power-law", "water": "power-law",
    "mixed": "mixed",
}


def _tree_edges(template, n, rng):
    if template == "chain":
        return [(i, i + 1) for i in range(n - 1)]
    if template == "star":
        return [(0, i) for i in range(1, n)]
    if template == "random-radial":
        return [(int(rng.integers(0, i)), i) for i in range(1, n)]
    raise ValidationError(f"unknown template {template!r}; choose from {TEMPLATES}")


def random_spec(family: str, rng, compressor_prob: float = 0.0) -> FlowFunctionSpec:
    """Edge parameters on a per-unit scale for one flow family."""
    fam = FAMILY_ALIASES.get(family)
    if fam is None:
        raise ValidationError(f"unknown flow family {family!r}")
    if fam == "mixed":
        fam = ("linear-1", "quadratic", "power-law")[int(rng.integers(0, 3))]
    if fam == "linear":
        return FlowFunctionSpec.lindistflow(rng.uniform(0.002, 0.006), rng.uniform(0.002, 0.006))
    if fam == "linear-1":
        return FlowFunctionSpec.linear(rng.uniform(0.004, 0.012))
    beta = rng.uniform(0.0, 0.05) if compressor_prob > 0 and rng.random() < compressor_prob else 0.0
    if fam == "quadratic":
        return FlowFunctionSpec.quadratic(rng.uniform(5e-4, 1.5e-3), beta)
    return FlowFunctionSpec.power_law(rng.uniform(5e-4, 1.5e-3), beta=beta)


def gen_network(template: str, n: int, fictitious: int, family: str, seed: int,
                reference: int = 0, compressor_prob: float = 0.0) -> NetworkGraph:
    """Radial tree from ``template`` plus ``fictitious`` non-operational candidates.

    Fictitious edges are drawn uniformly, without repeats, from node pairs
    not in the tree.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 nodes, got {n}")
    if not 0 <= reference < n:
        raise ValidationError(f"reference {reference} outside 0..{n - 1}")
    rng = np.random.default_rng(seed)
    tree = [(min(u, v), max(u, v)) for u, v in _tree_edges(template, n, rng)]
    if reference != 0:
        swap = {0: reference, reference: 0}
        tree = [tuple(sorted((swap.get(u, u), swap.get(v, v)))) for u, v in tree]
    in_tree = set(tree)
    spare = n * (n - 1) // 2 - len(tree)
    if fictitious > spare:
        raise TooManyFictitious(f"{fictitious} fictitious edges requested, only {spare} non-tree pairs exist")
    if fictitious < 0:
        raise ValidationError("fictitious edge count must be >= 0")
    iu, iv = np.triu_indices(n, k=1)
    pool = [(int(u), int(v)) for u, v in zip(iu, iv) if (int(u), int(v)) not in in_tree]
    picks = rng.choice(len(pool), size=fictitious, replace=False) if fictitious else []
    extra = sorted(pool[i] for i in picks)
    edges = [CandidateEdge(u, v, random_spec(family, rng, compressor_prob), True) for u, v in tree]
    edges += [CandidateEdge(u, v, random_spec(family, rng, compressor_prob), False) for u, v in extra]
    return NetworkGraph(n, reference, tuple(edges))


def commodities(graph: NetworkGraph) -> int:
    return max(e.flow.commodities for e in graph.edges)


def _edge_set(x) -> set:
    if isinstance(x, LearnedTopology):
        return x.edge_set()
    if isinstance(x, NetworkGraph):
        return x.operational_pairs()
    return {(min(int(u), int(v)), max(int(u), int(v))) for u, v in x}


def eval_topology(learned, truth) -> float:
    """Fraction of true edges the learner got wrong: ``|learned - true| / |true|``."""
    got, want = _edge_set(learned), _edge_set(truth)
    if len(got) != len(want):
        raise SizeMismatch(f"learned tree has {len(got)} edges, truth has {len(want)}")
    if not want:
        return 0.0
    return len(got - want) / len(want)


@dataclass
class ExperimentConfig:
    network: Optional[str] = None
    template: str = "random-radial"
    nodes: int = 30
    fictitious: int = 30
    family: str = "linear"
    network_seed: int = 0
    sample_counts: list = field(default_factory=lambda: [25, 50, 100, 200, 400])
    noise_fractions: list = field(default_factory=lambda: [0.0])
    trials: int = 50
    seed: int = 0
    out_dir: str = "."
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.sample_counts or any(int(m) < 2 for m in self.sample_counts):
            raise ValidationError("sample counts must be >= 2")
        if not self.noise_fractions or any(r < 0 or not math.isfinite(r) for r in self.noise_fractions):
            raise ValidationError("noise fractions must be finite and >= 0")
        self.sample_counts = [int(m) for m in self.sample_counts]
        self.noise_fractions = [float(r) for r in self.noise_fractions]

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def build_network(self) -> NetworkGraph:
        if self.network:
            return load_network(self.network)
        return gen_network(self.template, self.nodes, self.fictitious, self.family, self.network_seed)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ErrorRow:
    m: int
    rho: float
    mean_err: float
    std_err: float
    trials: int


@dataclass
class ErrorReport:
    rows: list
    trial_errors: dict

    def row(self, m, rho) -> ErrorRow:
        for r in self.rows:
            if r.m == m and r.rho == rho:
                return r
        raise KeyError((m, rho))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "rho", "mean_err", "std_err", "trials"])
        for r in self.rows:
            w.writerow([r.m, repr(r.rho), repr(r.mean_err), repr(r.std_err), r.trials])
        return buf.getvalue()

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "rho", "trial", "error"])
        for (m, rho), errs in self.trial_errors.items():
            for t, e in enumerate(errs):
                w.writerow([m, repr(rho), t, repr(e)])
        return buf.getvalue()


def default_model(graph: NetworkGraph, seed: int) -> InjectionModel:
    """Injection model used by sweeps and the CLI when none is supplied."""
    return InjectionModel.random(graph.node_count, commodities(graph), (graph.reference,), seed)


def _cell_seeds(seed, mi, ri, t):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(mi, ri, t))
    a, b = ss.generate_state(2)
    return int(a), int(b)


def run_trial(graph, model, m, rho, sim_seed, noise_seed) -> float:
    noise = NoiseSpec(rho, noise_seed) if rho > 0 else None
    sim = simulate(graph, model, m, sim_seed, noise=noise)
    learned = learn_structure(sim.measurements, graph.candidate_pairs())
    return eval_topology(learned, graph)


def _run_cell(args):
    graph, model, m, rho, sim_seed, noise_seed = args
    return run_trial(graph, model, m, rho, sim_seed, noise_seed)


def run_sweep(config: ExperimentConfig, graph: Optional[NetworkGraph] = None,
              model: Optional[InjectionModel] = None) -> ErrorReport:
    graph = graph or config.build_network()
    model = model or default_model(graph, config.seed)
    jobs, keys = [], []
    for mi, m in enumerate(config.sample_counts):
        for ri, rho in enumerate(config.noise_fractions):
            for t in range(config.trials):
                s_sim, s_noise = _cell_seeds(config.seed, mi, ri, t)
                jobs.append((graph, model, m, rho, s_sim, s_noise))
                keys.append((m, rho))
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        results = [_run_cell(j) for j in jobs]
    trial_errors = {}
    for key, err in zip(keys, results):
        trial_errors.setdefault(key, []).append(err)
    rows = []
    for m in sorted(set(config.sample_counts)):
        for rho in sorted(set(config.noise_fractions)):
            errs = np.asarray(trial_errors[(m, rho)])
            std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
            rows.append(ErrorRow(m, rho, float(errs.mean()), std, int(errs.size)))
    ordered = {k: trial_errors[k] for k in sorted(trial_errors)}
    return ErrorReport(rows, ordered)


def write_sweep(report: ErrorReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    path.write_text(report.to_csv())
    (out / "sweep_trials.csv").write_text(report.trials_csv())
    return path


__all__ = [
    "TEMPLATES", "gen_network", "random_spec", "eval_topology", "ExperimentConfig",
    "ErrorRow", "ErrorReport", "run_sweep", "run_trial", "write_sweep", "default_model",
]
