"""Topology learning for radial flow networks from nodal potential statistics."""

__version__ = "0.1.0"

from .errors import PipelineError, RadialFlowError, ValidationError
from .flowmodel import FlowFunctionSpec, eval_g, invert_g, is_monotone
from .learner import (DisjointSetForest, EdgeWeightMap, LearnedTopology, edge_variances,
                      group_components, kruskal_mst, learn_forest, learn_structure)
from .network import (CandidateEdge, NetworkGraph, RadialTree, descendants, load_network,
                      path_to_reference, reduced_incidence, save_network, validate_forest,
                      validate_radial)
from .simulator import (InjectionModel, MeasurementSet, NoiseSpec, add_noise, sample_injections,
                        simulate, solve_flows, solve_potentials)

__all__ = [
    "PipelineError", "RadialFlowError", "ValidationError",
    "FlowFunctionSpec", "eval_g", "invert_g", "is_monotone",
    "DisjointSetForest", "EdgeWeightMap", "LearnedTopology", "edge_variances",
    "group_components", "kruskal_mst", "learn_forest", "learn_structure",
    "CandidateEdge", "NetworkGraph", "RadialTree", "descendants", "load_network",
    "path_to_reference", "reduced_incidence", "save_network", "validate_forest", "validate_radial",
    "InjectionModel", "MeasurementSet", "NoiseSpec", "add_noise", "sample_injections",
    "simulate", "solve_flows", "solve_potentials",
]
