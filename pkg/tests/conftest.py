"""Shared fixtures for the boomerang dynamics test suite."""

import numpy as np
import pytest

from boomerang_model import ModelParams, Trajectory
from signed_graph import FactionPartition, build_signed_graph, generate_complete_clustered


@pytest.fixture
def fig1():
    """Complete [5, 7] structurally balanced graph and its factions."""
    return generate_complete_clustered([5, 7])


@pytest.fixture
def negative_triangle():
    return build_signed_graph(3, [(0, 1, -1), (1, 2, -1), (0, 2, -1)])


@pytest.fixture
def unbalanced_triangle():
    return build_signed_graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, -1)])


@pytest.fixture
def two_pairs():
    return FactionPartition(blocks=((0, 1), (2, 3)))


def make_trajectory(states, o_min=0.0, o_max=1.0, a=0.5, graph=None):
    """Trajectory wrapper around hand-written states, one step per row."""
    states = np.array(states, dtype=float)
    n = states.shape[1]
    if graph is None:
        graph = build_signed_graph(n, [(i, i + 1, 1) for i in range(n - 1)])
    return Trajectory(
        graph=graph,
        params=ModelParams.uniform(n, a, o_min, o_max),
        times=np.arange(len(states), dtype=np.int64),
        states=states,
        edge_log=np.zeros((len(states) - 1, 2), dtype=np.int64),
    )


@pytest.fixture
def trajectory_from():
    return make_trajectory
