"""Recover edge flows and nodal injections from potentials on a known tree.

Requires the flow function of every tree edge.  Flows come from inverting
each edge's potential drop; injections from flow conservation at each node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DimensionMismatch, UnknownEdgeSpec
from .flowmodel import FlowFunctionSpec, invert_g
from .network import NetworkGraph, RadialTree
from .simulator import MeasurementSet


@dataclass
class InjectionEstimate:
    mean: np.ndarray
    var: np.ndarray
    count: int
    biased: bool = False

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"node": i, "mean": float(mu), "var": float(v), "count": int(self.count)}
                for i, (mu, v) in enumerate(zip(self.mean, self.var))
            ],
            "biased": bool(self.biased),
        }


def _spec_lookup(specs, a, b):
    if isinstance(specs, NetworkGraph):
        try:
            return specs.spec_for(a, b)
        except KeyError:
            raise UnknownEdgeSpec(f"network has no edge ({a},{b})") from None
    key = (a, b) if a < b else (b, a)
    if isinstance(specs, Mapping):
        for k in (key, (b, a), a):
            if k in specs:
                return specs[k]
        raise UnknownEdgeSpec(f"no flow function for edge {key}")
    spec = specs[a]
    if spec is None:
        raise UnknownEdgeSpec(f"no flow function for edge {key}")
    return spec


def recover_flows(tree: RadialTree, specs: Union[NetworkGraph, Mapping, list],
                  ms: MeasurementSet) -> np.ndarray:
    """Flow on every tree edge for every sample, shape ``(m, n)`` by child node.

    ``specs`` may be a network (looked up by endpoints), a mapping keyed by
    ``(u, v)`` pairs or by child node, or a per-node list.
    """
    X = ms.samples
    if X.shape[1] != tree.node_count:
        raise DimensionMismatch(f"measurements cover {X.shape[1]} nodes, tree has {tree.node_count}")
    F = np.zeros_like(X)
    for a in tree.order:
        if a == tree.root:
            continue
        b = tree.parent[a]
        spec: FlowFunctionSpec = _spec_lookup(specs, a, b)
        F[:, a] = invert_g(spec, X[:, a] - X[:, b])[:, 0]
    return F


def recover_injections(tree: RadialTree, flows) -> np.ndarray:
    """Injections from flow conservation, shape ``(m, n)``.

    A non-root node injects its outgoing flow minus what its children send
    in; the root takes the balancing residual.
    """
    F = np.asarray(flows, dtype=float)
    P = np.zeros_like(F)
    for a in tree.order:
        if a == tree.root:
            continue
        P[:, a] = F[:, a]
        for c in tree.children[a]:
            P[:, a] -= F[:, c]
    members = [a for a in tree.order if a != tree.root]
    P[:, tree.root] = -P[:, members].sum(axis=1)
    return P


def injection_statistics(injections, biased: bool = False) -> InjectionEstimate:
    P = np.asarray(injections, dtype=float)
    m = P.shape[0]
    var = P.var(axis=0, ddof=1) if m > 1 else np.zeros(P.shape[1])
    return InjectionEstimate(P.mean(axis=0), var, m, biased)


def estimate_injections(tree: RadialTree, specs, ms: MeasurementSet) -> InjectionEstimate:
    """Flows, then injections, then their mean and variance.

    Estimates from noisy measurements are returned but flagged ``biased``.
    """
    P = recover_injections(tree, recover_flows(tree, specs, ms))
    return injection_statistics(P, biased=bool(ms.meta.get("noise_frac", 0.0)))
