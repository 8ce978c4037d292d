import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plasticflow.topology import NetworkGraph, NodeRole

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

S, R, T = NodeRole.SOURCE, NodeRole.ROUTER, NodeRole.TARGET


def make_graph(roles, edges, capacity=1000):
    return NetworkGraph(np.array(roles, dtype=np.int8), np.array(edges, dtype=np.int64), capacity)


@pytest.fixture
def line_graph():
    """s0 -> r1 -> r2 -> t3"""
    return make_graph([S, R, R, T], [(0, 1), (1, 2), (2, 3)], capacity=10)


@pytest.fixture
def diamond():
    """s0 -> r1 -> {r2, r3} -> r4 -> t5"""
    return make_graph(
        [S, R, R, R, R, T],
        [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)],
    )


@pytest.fixture
def contention_graph():
    """s0, s1 -> r2 -> r3 -> t4 with capacity 6 on every edge."""
    return make_graph([S, S, R, R, T], [(0, 2), (1, 2), (2, 3), (3, 4)], capacity=6)
