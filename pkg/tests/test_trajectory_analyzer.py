"""Tests for the trajectory detectors and statistics."""

import numpy as np
import pytest

from boomerang_model import ModelParams, OpinionState, run_trajectory, uniform_edge_distribution
from exceptions import InvalidEpsilon, NeverSeparated, WrongFactionCount
from signed_graph import FactionPartition
from trajectory_analyzer import (
    TrajectoryAnalyzer,
    absorbing_audit,
    classify_separation,
    consensus_stop_rule,
    detect_consensus,
    detect_polarization,
    extremum_series,
    faction_polarization,
    fluctuation_stats,
    monotonicity_audit,
    near_extreme_occupancy,
    polarization_stop_rule,
    separation_time,
    spread,
)

THREE = FactionPartition(blocks=((0,), (1,), (2,)))
PAIR_AND_ONE = FactionPartition(blocks=((0, 1), (2,)))


class TestSpreadAndSeparation:
    @pytest.mark.parametrize('x, expected', [
        ((0.3, 0.3, 0.3), 0.0),
        ((0.0, 1.0), 1.0),
        ((0.15, 0.85), 0.7),
    ])
    def test_spread(self, x, expected):
        assert spread(x) == pytest.approx(expected)

    def test_spread_accepts_states(self):
        assert spread(OpinionState((0.2, 0.9, 0.5))) == pytest.approx(0.7)

    def test_strict_separation(self, two_pairs):
        result = classify_separation((0.1, 0.2, 0.8, 0.9), two_pairs)
        assert result.z == 2
        assert (result.low_faction, result.high_faction) == (0, 1)
        assert result.gap == pytest.approx(0.6)

    def test_reversed_orientation(self, two_pairs):
        result = classify_separation((0.8, 0.9, 0.1, 0.2), two_pairs)
        assert (result.z, result.low_faction) == (2, 1)

    @pytest.mark.parametrize('x', [(0.1, 0.9, 0.2, 0.8), (0.5, 0.5, 0.5, 0.5), (0.1, 0.5, 0.5, 0.9)])
    def test_no_strict_separation(self, two_pairs, x):
        result = classify_separation(x, two_pairs)
        assert result.z == 1
        assert result.low_faction is None and result.gap is None

    def test_needs_two_factions(self):
        with pytest.raises(WrongFactionCount):
            classify_separation((0.1, 0.2, 0.3), THREE)


class TestExtremaAndAudits:
    def test_separated_at_extremes_is_constant(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0, 0, 1, 1]] * 4)
        series = extremum_series(traj, two_pairs)
        assert series.theta_low.tolist() == [0.0] * 4
        assert series.theta_high.tolist() == [1.0] * 4
        assert series.separation_index == 0

    def test_single_state(self, two_pairs, trajectory_from):
        series = extremum_series(trajectory_from([[0.1, 0.2, 0.7, 0.8]]), two_pairs)
        assert len(series.theta_low) == 1

    def test_never_separated(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0.1, 0.9, 0.2, 0.8], [0.5, 0.5, 0.5, 0.5]])
        with pytest.raises(NeverSeparated):
            extremum_series(traj, two_pairs)
        assert separation_time(traj, two_pairs) is None
        assert absorbing_audit(traj, two_pairs)
        assert monotonicity_audit(traj, two_pairs)

    def test_separation_time_and_roles(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0.5, 0.1, 0.4, 0.9], [0.7, 0.8, 0.2, 0.3], [0.75, 0.8, 0.1, 0.3]])
        assert separation_time(traj, two_pairs) == 1
        series = extremum_series(traj, two_pairs)
        assert (series.low_faction, series.high_faction) == (1, 0)
        assert series.theta_low.tolist() == [0.9, 0.3, 0.3]
        assert monotonicity_audit(traj, two_pairs)
        assert absorbing_audit(traj, two_pairs)

    def test_absorbing_violation_detected(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0.1, 0.2, 0.8, 0.9], [0.1, 0.9, 0.2, 0.8]])
        assert not absorbing_audit(traj, two_pairs)

    def test_orientation_swap_is_a_violation(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0.1, 0.2, 0.8, 0.9], [0.8, 0.9, 0.1, 0.2]])
        assert not absorbing_audit(traj, two_pairs)

    def test_monotonicity_violation_detected(self, two_pairs, trajectory_from):
        traj = trajectory_from([[0.1, 0.2, 0.8, 0.9], [0.1, 0.3, 0.8, 0.9]])
        assert not monotonicity_audit(traj, two_pairs)

    def test_simulated_polarizing_trajectory_passes_audits(self, fig1):
        g, partition = fig1
        params = ModelParams.uniform(12, 0.5)
        traj = run_trajectory(g, uniform_edge_distribution(g), params,
                              np.random.default_rng(4).random(12), 20_000, seed=4)
        assert absorbing_audit(traj, partition)
        assert monotonicity_audit(traj, partition)


class TestVerdicts:
    def test_constant_consensus(self, trajectory_from):
        verdict = detect_consensus(trajectory_from([[0.3, 0.3, 0.3]] * 3), 1e-6)
        assert verdict.converged
        assert verdict.value == pytest.approx(0.3)
        assert verdict.hit_time == 0

    def test_consensus_threshold(self, trajectory_from):
        verdict = detect_consensus(trajectory_from([[0.5, 0.501, 0.5005]]), 1e-6)
        assert not verdict.converged
        assert verdict.value is None and verdict.hit_time is None
        assert verdict.final_spread == pytest.approx(1e-3)

    def test_consensus_hit_time(self, trajectory_from):
        verdict = detect_consensus(trajectory_from([[0.1, 0.9], [0.5, 0.5], [0.5, 0.5]]), 1e-6)
        assert verdict.hit_time == 1

    def test_polarized_at_exact_extremes(self, trajectory_from):
        verdict = detect_polarization(trajectory_from([[0, 0, 1]]), PAIR_AND_ONE, 1e-9)
        assert verdict.polarized
        assert (verdict.low_faction, verdict.high_faction) == (0, 1)

    def test_opposite_orientation(self, trajectory_from):
        verdict = detect_polarization(trajectory_from([[1, 1, 0]]), PAIR_AND_ONE, 1e-9)
        assert verdict.polarized
        assert verdict.low_faction == 1

    def test_not_yet_polarized(self, trajectory_from):
        verdict = detect_polarization(trajectory_from([[0.4, 0.4, 0.6]]), PAIR_AND_ONE, 1e-3)
        assert not verdict.polarized
        assert verdict.hit_time is None

    def test_polarization_hit_time(self, trajectory_from):
        traj = trajectory_from([[0.2, 0.3, 0.7], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
        assert detect_polarization(traj, PAIR_AND_ONE, 1e-3).hit_time == 1

    def test_polarization_needs_two_factions(self, trajectory_from):
        with pytest.raises(WrongFactionCount):
            detect_polarization(trajectory_from([[0, 0.5, 1]]), THREE, 1e-3)

    @pytest.mark.parametrize('x', [[0, 0, 1], [1, 1, 0], [0.5, 0.5, 0.5], [0.2, 0.2, 0.2 + 1e-7], [0.4, 0.1, 0.9]])
    def test_verdicts_are_mutually_exclusive(self, trajectory_from, x):
        traj = trajectory_from([x])
        tol = 0.3
        both = detect_consensus(traj, tol).converged and detect_polarization(traj, PAIR_AND_ONE, tol).polarized
        assert not both


class TestFluctuations:
    def test_constant_midpoint(self, trajectory_from):
        stats = fluctuation_stats(trajectory_from([[0.5, 0.5]] * 5), None, 0.1)
        assert stats.visits_low == (0, 0) and stats.visits_high == (0, 0)
        assert stats.occupancy[0] == (0.0, 1.0, 0.0)

    def test_visits_and_crossings(self, trajectory_from):
        values = [0.5, 0.05, 0.5, 0.95, 0.97, 0.05]
        traj = trajectory_from([[v, 0.5] for v in values])
        stats = fluctuation_stats(traj, [0], 0.1)
        assert stats.agents == (0,)
        assert stats.visits_low == (2,)
        assert stats.visits_high == (1,)
        assert stats.crossings == (2,)
        assert stats.occupancy[0] == pytest.approx((2 / 6, 2 / 6, 2 / 6))
        assert sum(stats.occupancy[0]) == pytest.approx(1.0, abs=1e-12)

    def test_initial_state_is_not_a_visit(self, trajectory_from):
        stats = fluctuation_stats(trajectory_from([[0.05], [0.02], [0.0]]), None, 0.1)
        assert stats.visits_low == (0,)
        assert stats.occupancy[0] == (1.0, 0.0, 0.0)

    def test_bounds_count_as_extreme_bands(self, trajectory_from):
        stats = fluctuation_stats(trajectory_from([[0.5, 0.5], [0.0, 1.0]]), None, 0.1)
        assert stats.visits_low == (1, 0)
        assert stats.visits_high == (0, 1)

    @pytest.mark.parametrize('epsilon', [0.0, 0.5, 0.7])
    def test_epsilon_range(self, trajectory_from, epsilon):
        with pytest.raises(InvalidEpsilon):
            fluctuation_stats(trajectory_from([[0.5]]), None, epsilon)

    def test_near_extreme_occupancy(self, trajectory_from):
        traj = trajectory_from([[0.05, 0.5], [0.5, 0.95]])
        assert near_extreme_occupancy(traj, None, 0.1) == pytest.approx(0.5)

    def test_to_dict_lists_every_agent(self, trajectory_from):
        payload = fluctuation_stats(trajectory_from([[0.5, 0.5, 0.5]]), [2, 0], 0.1).to_dict()
        assert [entry['agent'] for entry in payload['agents']] == [2, 0]


class TestFactionLabelsAndStopRules:
    def test_faction_polarization_labels(self):
        params = ModelParams.uniform(4, 0.5)
        partition = FactionPartition(blocks=((0,), (1, 2), (3,)))
        labels = faction_polarization((0.0, 0.9999, 1.0, 0.4), partition, params, 1e-3)
        assert labels == ('low', 'high', 'none')

    def test_consensus_stop_rule(self):
        stop = consensus_stop_rule(1e-3)
        assert stop(OpinionState((0.5, 0.5005)))
        assert not stop(OpinionState((0.5, 0.6)))

    def test_polarization_stop_rule_either_orientation(self):
        stop = polarization_stop_rule(PAIR_AND_ONE, ModelParams.uniform(3, 0.5), 1e-3)
        assert stop(OpinionState((0.0, 0.0005, 1.0)))
        assert stop(OpinionState((1.0, 0.9999, 0.0)))
        assert not stop(OpinionState((0.0, 0.5, 1.0)))


class TestAnalyzer:
    def test_polarizing_run_report(self, fig1):
        g, partition = fig1
        params = ModelParams.uniform(12, 0.5)
        traj = run_trajectory(g, uniform_edge_distribution(g), params, np.random.default_rng(8).random(12),
                              200_000, stop=polarization_stop_rule(partition, params, 1e-3), seed=8)
        report = TrajectoryAnalyzer(traj, partition, tol=1e-3, epsilon=0.1).analyze()
        payload = report.to_dict()

        assert payload['schema_version'] == '1.0'
        assert payload['verdict'] == 'polarization'
        assert payload['hit_time'] == traj.steps
        assert payload['absorbing'] and payload['monotone']
        assert set(payload['orientation']) == {'low_faction', 'high_faction'}
        assert payload['stop_reason'] == 'stop_rule'
        assert len(payload['fluctuation']['agents']) == 12

    def test_consensus_report(self, trajectory_from):
        report = TrajectoryAnalyzer(trajectory_from([[0.2, 0.8], [0.5, 0.5]]), tol=1e-3, epsilon=None).analyze()
        assert report.verdict == 'consensus'
        assert report.c == pytest.approx(0.5)
        assert report.hit_time == 1
        assert report.to_dict()['polarization'] is None
        assert report.to_dict()['fluctuation'] is None

    def test_clustering_partition_gets_labels_only(self, trajectory_from):
        report = TrajectoryAnalyzer(trajectory_from([[0.0, 1.0, 0.5]]), THREE, tol=1e-3).analyze()
        assert report.faction_labels == ('low', 'high', 'none')
        assert report.absorbing is None
        assert report.verdict == 'not_yet'
