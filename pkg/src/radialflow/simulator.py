"""Ground-truth injections, flows and nodal potentials on a radial tree.

Arrays follow one layout throughout:

* injections and flows: ``(m, n, k)`` for ``m`` samples, ``n`` nodes and
  ``k`` commodities.  ``flows[:, a]`` is the flow on the edge from ``a`` to
  its parent; root entries are zero.
* potentials: ``(m, n)``.

Random draws are made in fixed blocks of :data:`BLOCK` samples, each block
seeded from ``(seed, block_index)``.  Output therefore does not depend on
how many workers generate it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientSamples, InvalidModel, SchemaError
from .flowmodel import eval_g
from .network import NetworkGraph, RadialTree, validate_forest, validate_radial

BLOCK = 4096


@dataclass(frozen=True, eq=False)
class InjectionModel:
    """Independent Gaussian injections per node and commodity.

    ``mean`` and ``var`` have shape ``(n, k)``.  Rows for reference nodes
    are ignored (their injection balances the rest of their tree).
    """

    mean: np.ndarray
    var: np.ndarray
    references: tuple = (0,)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float, copy=True)
        var = np.array(self.var, dtype=float, copy=True)
        if mean.ndim == 1:
            mean = mean[:, None]
        if var.ndim == 1:
            var = var[:, None]
        if mean.shape != var.shape:
            raise InvalidModel(f"mean shape {mean.shape} != variance shape {var.shape}")
        refs = tuple(int(r) for r in self.references)
        active = np.ones(mean.shape[0], dtype=bool)
        active[list(refs)] = False
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(var)):
            raise InvalidModel("injection parameters must be finite")
        bad = np.flatnonzero(active & np.any(var <= 0, axis=1))
        if bad.size:
            raise InvalidModel(f"injection variance must be > 0 (node {int(bad[0])})")
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "references", refs)

    @property
    def node_count(self) -> int:
        return self.mean.shape[0]

    @property
    def commodities(self) -> int:
        return self.mean.shape[1]

    @property
    def active(self) -> np.ndarray:
        mask = np.ones(self.node_count, dtype=bool)
        mask[list(self.references)] = False
        return mask

    @classmethod
    def random(cls, node_count, commodities=1, references=(0,), seed=0,
               mean_range=(-1.5, -0.5), std_range=(0.1, 0.3)):
        """Model with per-node means and standard deviations drawn uniformly.

        Negative means model net consumption.
        """
        rng = np.random.default_rng(seed)
        mean = rng.uniform(*mean_range, size=(node_count, commodities))
        std = rng.uniform(*std_range, size=(node_count, commodities))
        refs = tuple(references)
        mean[list(refs)] = 0.0
        return cls(mean, std ** 2, refs)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "var": self.var.tolist(), "references": list(self.references)}

    @classmethod
    def from_dict(cls, data) -> "InjectionModel":
        if set(data) - {"mean", "var", "references"}:
            raise SchemaError(f"unknown injection model fields {sorted(set(data) - {'mean', 'var', 'references'})}")
        return cls(np.asarray(data["mean"]), np.asarray(data["var"]), tuple(data.get("references", (0,))))


@dataclass(frozen=True)
class NoiseSpec:
    fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.fraction) and self.fraction >= 0):
            raise InvalidModel(f"noise fraction must be >= 0, got {self.fraction}")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch(f"measurements must be 2-D (samples x nodes), got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DimensionMismatch("measurements contain non-finite values")
        object.__setattr__(self, "samples", x)
        meta = dict(self.meta)
        meta.setdefault("m", x.shape[0])
        object.__setattr__(self, "meta", meta)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def node_count(self) -> int:
        return self.samples.shape[1]

    def scaled(self, k) -> "MeasurementSet":
        return MeasurementSet(self.samples * k, self.meta)

    def subset(self, nodes) -> "MeasurementSet":
        return MeasurementSet(self.samples[:, list(nodes)], self.meta)


def square(x):
    """Convert raw voltage or pressure magnitudes to potentials."""
    x = np.asarray(x, dtype=float)
    return x * x


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def sample_injections(model: InjectionModel, m: int, seed: int, workers: int = 1) -> np.ndarray:
    """Draw ``m`` independent injection samples, shape ``(m, n, k)``.

    Reference rows are filled with zeros; use :func:`reference_injections`
    to balance them.
    """
    if m < 1:
        raise InsufficientSamples(f"need at least one sample, got {m}")
    n, k = model.mean.shape
    std = np.sqrt(model.var) * model.active[:, None]
    mean = model.mean * model.active[:, None]
    nblocks = -(-m // BLOCK)

    def draw(b):
        size = min(BLOCK, m - b * BLOCK)
        z = _block_rng(seed, b).standard_normal((size, n, k))
        return mean + std * z

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(draw, range(nblocks)))
    else:
        parts = [draw(b) for b in range(nblocks)]
    return np.concatenate(parts, axis=0)


def _as_3d(x):
    x = np.asarray(x, dtype=float)
    return x[..., None] if x.ndim == 2 else x


def reference_injections(tree: RadialTree, injections) -> np.ndarray:
    """Copy of ``injections`` with the root set to minus the sum over its tree."""
    P = _as_3d(injections).copy()
    members = [a for a in tree.order if a != tree.root]
    P[:, tree.root] = -P[:, members].sum(axis=1)
    return P


def solve_flows(tree: RadialTree, injections) -> np.ndarray:
    """Edge flows from injections: each edge carries its subtree's total injection.

    Returns ``(m, n, k)`` (or ``(m, n)`` for 2-D input) indexed by child node.
    """
    raw = np.asarray(injections, dtype=float)
    P = _as_3d(raw)
    F = np.zeros_like(P)
    for a in reversed(tree.order):
        if a == tree.root:
            continue
        F[:, a] += P[:, a]
        F[:, tree.parent[a]] += F[:, a]
    F[:, tree.root] = 0.0
    return F if raw.ndim == 3 else F[..., 0]


def solve_potentials(tree: RadialTree, flows, specs: Sequence, ref_potential: float = 1.0,
                     out: Optional[np.ndarray] = None) -> np.ndarray:
    """Nodal potentials: the root potential plus the drops along each root path.

    ``specs[a]`` is the flow function of the edge leaving ``a``.  Columns of
    nodes outside ``tree`` are left untouched in ``out`` (zero if fresh).
    """
    F = _as_3d(flows)
    m, n, _ = F.shape
    pi = np.zeros((m, n)) if out is None else out
    pi[:, tree.root] = ref_potential
    for a in tree.order:
        if a == tree.root:
            continue
        spec = specs[a]
        drop = eval_g(spec, F[:, a, :spec.commodities])
        pi[:, a] = pi[:, tree.parent[a]] + drop
    return pi


def edge_specs(graph: NetworkGraph, tree: RadialTree) -> list:
    """Flow spec of the edge leaving each node (``None`` for roots/outsiders)."""
    return [graph.edges[tree.edge_of[a]].flow if tree.edge_of[a] >= 0 else None
            for a in range(graph.node_count)]


def add_noise(ms: MeasurementSet, noise: NoiseSpec) -> MeasurementSet:
    """Add i.i.d. Gaussian noise with variance ``fraction`` times the mean nodal variance.

    The mean is taken over non-reference nodes (constant columns excluded
    if the meta does not list references).
    """
    meta = dict(ms.meta)
    meta["noise_frac"] = float(noise.fraction)
    meta["noise_seed"] = int(noise.seed)
    if noise.fraction == 0:
        return MeasurementSet(ms.samples.copy(), meta)
    if ms.m < 2:
        raise InsufficientSamples("noise level needs at least two samples to estimate variance")
    var = ms.samples.var(axis=0, ddof=1)
    refs = meta.get("references")
    mask = np.ones(ms.node_count, dtype=bool)
    if refs is not None:
        mask[list(refs)] = False
    else:
        mask &= var > 0
    base = float(var[mask].mean()) if mask.any() else 0.0
    sigma2 = noise.fraction * base
    meta["noise_var"] = sigma2
    rng = np.random.default_rng(np.random.SeedSequence(entropy=noise.seed, spawn_key=(0x6E6F,)))
    return MeasurementSet(ms.samples + math.sqrt(sigma2) * rng.standard_normal(ms.samples.shape), meta)


@dataclass
class Simulation:
    injections: np.ndarray
    flows: np.ndarray
    measurements: MeasurementSet
    trees: list


def simulate(graph: NetworkGraph, model: InjectionModel, m: int, seed: int,
             ref_potential: float = 1.0, noise: Optional[NoiseSpec] = None,
             forest: bool = False, workers: int = 1) -> Simulation:
    """Full pipeline: injections, flows, potentials and optional noise.

    With ``forest=True`` every operational component is simulated with its
    own root (taken from ``model.references`` where possible), all roots
    held at ``ref_potential``.
    """
    if model.node_count != graph.node_count:
        raise DimensionMismatch(f"model has {model.node_count} nodes, network has {graph.node_count}")
    trees = validate_forest(graph, model.references) if forest else [validate_radial(graph)]
    k = model.commodities
    for e in graph.operational_edges:
        if e.flow.commodities > k:
            raise DimensionMismatch(f"edge {e.key} needs {e.flow.commodities} commodities, model has {k}")
    P = sample_injections(model, m, seed, workers)
    F = np.zeros_like(P)
    pi = np.zeros((m, graph.node_count))
    for tree in trees:
        P = reference_injections(tree, P)
        F += solve_flows(tree, P)
        solve_potentials(tree, F, edge_specs(graph, tree), ref_potential, out=pi)
    meta = {
        "seed": int(seed),
        "m": int(m),
        "noise_frac": 0.0,
        "network_hash": graph.digest(),
        "references": sorted(t.root for t in trees),
        "ref_potential": float(ref_potential),
    }
    ms = MeasurementSet(pi, meta)
    if noise is not None:
        ms = add_noise(ms, noise)
    return Simulation(P, F, ms, trees)


def write_measurements(ms: MeasurementSet, path) -> Path:
    """Write ``sample_id,node_0,...`` CSV plus a ``.meta.json`` sidecar."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id"] + [f"node_{i}" for i in range(ms.node_count)])
    for i, row in enumerate(ms.samples):
        w.writerow([i] + [repr(float(x)) for x in row])
    path.write_text(buf.getvalue())
    meta_path(path).write_text(json.dumps(ms.meta, indent=2, sort_keys=True) + "\n")
    return path


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_measurements(path) -> MeasurementSet:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty measurement file") from None
        expected = ["sample_id"] + [f"node_{i}" for i in range(len(header) - 1)]
        if header != expected:
            raise SchemaError(f"{path}: header must be sample_id,node_0,...,node_(n-1)")
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{line}: expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError:
                raise SchemaError(f"{path}:{line}: non-numeric value") from None
    samples = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    meta = {}
    side = meta_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    meta["m"] = samples.shape[0]
    return MeasurementSet(samples, meta)


__all__ = [
    "InjectionModel", "NoiseSpec", "MeasurementSet", "Simulation", "square",
    "sample_injections", "reference_injections", "solve_flows", "solve_potentials",
    "edge_specs", "add_noise", "simulate", "write_measurements", "read_measurements",
]
