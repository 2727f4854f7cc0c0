"""Tests for constructive proximity sequences, checked by deterministic replay."""

import numpy as np
import pytest

from boomerang_model import ModelParams, replay_sequence
from exceptions import ArrangementViolated, IndexOutOfRange, InvalidEpsilon, InvalidParams
from proximity_builder import build_proximity_sequence
from signed_graph import (
    FactionPartition,
    build_signed_graph,
    classify_arrangement,
    generate_complete_clustered,
    random_arrangement_graph,
)


def _meets_target(x, i, j, same_faction, params, epsilon):
    if same_faction:
        return abs(x[i] - x[j]) < epsilon
    near_low = lambda v: v - params.o_min < epsilon
    near_high = lambda v: params.o_max - v < epsilon
    return (near_low(x[i]) and near_high(x[j])) or (near_high(x[i]) and near_low(x[j]))


def _check_pair(g, partition, params, i, j, epsilon, rng, starts=5):
    sequence = build_proximity_sequence(g, partition, params, i, j, epsilon)
    assert all(g.has_edge(u, v) for u, v in sequence)
    same = partition.faction_of(i) == partition.faction_of(j)
    for _ in range(starts):
        x0 = rng.uniform(params.o_min, params.o_max, g.n)
        final = replay_sequence(g, params, x0, sequence).final_state.x
        assert _meets_target(final, i, j, same, params, epsilon), (i, j, x0.tolist())


class TestProximitySequences:
    def test_same_faction_pair_becomes_close(self, fig1):
        g, partition = fig1
        _check_pair(g, partition, ModelParams.uniform(12, 0.5), 0, 4, 0.05, np.random.default_rng(1))

    def test_cross_faction_pair_separates(self, fig1):
        g, partition = fig1
        _check_pair(g, partition, ModelParams.uniform(12, 0.5), 0, 5, 0.05, np.random.default_rng(2))

    def test_same_agent_needs_no_edges(self, fig1):
        g, partition = fig1
        assert build_proximity_sequence(g, partition, ModelParams.uniform(12, 0.5), 3, 3, 0.1) == []

    def test_heavy_self_weights_on_a_path(self):
        g = build_signed_graph(5, [(0, 1, 1), (1, 2, 1), (2, 3, -1), (3, 4, 1)])
        partition = classify_arrangement(g).partition
        params = ModelParams(o_min=-1.0, o_max=1.0, self_weights=(0.9, 0.8, 0.7, 0.85, 0.6))
        rng = np.random.default_rng(3)
        _check_pair(g, partition, params, 0, 2, 0.05, rng)
        _check_pair(g, partition, params, 0, 4, 0.05, rng)

    @pytest.mark.parametrize('seed', range(8))
    def test_random_arrangement_graphs(self, seed):
        rng = np.random.default_rng(100 + seed)
        sizes = [int(s) for s in rng.integers(2, 6, size=2)]
        g, partition = random_arrangement_graph(sizes, rng)
        params = ModelParams(o_min=0.0, o_max=1.0, self_weights=tuple(rng.uniform(0.2, 0.8, g.n)))
        i, j = (int(v) for v in rng.choice(g.n, size=2, replace=False))
        _check_pair(g, partition, params, i, j, 0.05, rng)

    def test_clustering_balanced_graph_is_rejected(self, negative_triangle):
        partition = classify_arrangement(negative_triangle).partition
        with pytest.raises(ArrangementViolated):
            build_proximity_sequence(negative_triangle, partition, ModelParams.uniform(3, 0.5), 0, 1, 0.1)

    def test_unbalanced_graph_is_rejected(self, unbalanced_triangle):
        partition = FactionPartition(blocks=((0, 1), (2,)))
        with pytest.raises(ArrangementViolated):
            build_proximity_sequence(unbalanced_triangle, partition, ModelParams.uniform(3, 0.5), 0, 2, 0.1)

    def test_mismatched_partition_is_rejected(self, fig1):
        g, _ = fig1
        wrong = FactionPartition(blocks=(tuple(range(6)), tuple(range(6, 12))))
        with pytest.raises(ArrangementViolated):
            build_proximity_sequence(g, wrong, ModelParams.uniform(12, 0.5), 0, 1, 0.1)

    def test_argument_errors(self, fig1):
        g, partition = fig1
        params = ModelParams.uniform(12, 0.5)
        with pytest.raises(InvalidEpsilon):
            build_proximity_sequence(g, partition, params, 0, 1, 0.0)
        with pytest.raises(IndexOutOfRange):
            build_proximity_sequence(g, partition, params, 0, 12, 0.1)
        with pytest.raises(InvalidParams):
            build_proximity_sequence(g, partition, ModelParams.uniform(5, 0.5), 0, 1, 0.1)

    def test_sequences_are_deterministic(self):
        g, partition = generate_complete_clustered([3, 3])
        params = ModelParams.uniform(6, 0.3)
        assert build_proximity_sequence(g, partition, params, 0, 4, 0.01) == \
            build_proximity_sequence(g, partition, params, 0, 4, 0.01)


class TestTiedStarts:
    """Cross-faction sequences must split factions that start level with each other."""

    @pytest.fixture
    def two_pair_path(self):
        g = build_signed_graph(4, [(0, 1, 1), (2, 3, 1), (1, 2, -1)])
        return g, classify_arrangement(g).partition

    @pytest.mark.parametrize('level', [0.0, 0.2, 0.5, 0.9])
    def test_two_pairs_split_from_equal_opinions(self, two_pair_path, level):
        g, partition = two_pair_path
        params = ModelParams.uniform(4, 0.5)
        sequence = build_proximity_sequence(g, partition, params, 0, 3, 0.1)
        final = replay_sequence(g, params, [level] * 4, sequence).final_state.x
        assert abs(final[0] - final[3]) > 0.9
        assert _meets_target(final, 0, 3, False, params, 0.1)

    @pytest.mark.parametrize('level', [0.1, 0.5, 0.99])
    def test_complete_factions_split_from_equal_opinions(self, fig1, level):
        g, partition = fig1
        params = ModelParams.uniform(12, 0.5)
        sequence = build_proximity_sequence(g, partition, params, 0, 5, 0.05)
        final = replay_sequence(g, params, [level] * 12, sequence).final_state.x
        assert _meets_target(final, 0, 5, False, params, 0.05)

    def test_mixed_weights_split_from_equal_opinions(self):
        g = build_signed_graph(5, [(0, 1, 1), (1, 2, 1), (2, 3, -1), (3, 4, 1)])
        partition = classify_arrangement(g).partition
        params = ModelParams(o_min=-1.0, o_max=1.0, self_weights=(0.9, 0.8, 0.7, 0.85, 0.6))
        sequence = build_proximity_sequence(g, partition, params, 0, 4, 0.05)
        for level in (-1.0, -0.3, 0.4):
            final = replay_sequence(g, params, [level] * 5, sequence).final_state.x
            assert _meets_target(final, 0, 4, False, params, 0.05), level

    def test_upper_bound_is_a_fixed_point(self, two_pair_path):
        g, partition = two_pair_path
        params = ModelParams.uniform(4, 0.5)
        sequence = build_proximity_sequence(g, partition, params, 0, 3, 0.1)
        final = replay_sequence(g, params, [1.0] * 4, sequence).final_state.x
        np.testing.assert_array_equal(final, np.ones(4))
