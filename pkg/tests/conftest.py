import numpy as np
import pytest

from radialflow.flowmodel import FlowFunctionSpec
from radialflow.network import CandidateEdge, NetworkGraph

# Four-node example: reference a=0, b=1 hangs off a, c=2 and d=3 hang off b.
A, B, C, D = 0, 1, 2, 3


def make_graph(n, tree_edges, extra=(), spec=None, reference=0):
    spec = spec or FlowFunctionSpec.linear(1.0)
    edges = [CandidateEdge(u, v, spec, True) for u, v in tree_edges]
    edges += [CandidateEdge(u, v, spec, False) for u, v in extra]
    return NetworkGraph(n, reference, tuple(edges))


@pytest.fixture
def fig2_graph():
    return make_graph(4, [(B, A), (C, B), (D, B)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tree_edges(n, rng):
    return [(int(rng.integers(0, i)), i) for i in range(1, n)]


# One line per acceptance criterion, echoed at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
