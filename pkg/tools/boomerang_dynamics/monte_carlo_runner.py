"""
Monte Carlo Runner

Experiment presets, seeded trial execution and aggregation of per-trial
verdicts into experiment summaries.

Every trial owns a PCG64 stream whose seed is derived from the master seed
with numpy's SeedSequence; stream 0 is reserved for the sign perturbation,
so results do not depend on trial execution order or on the worker count.
"""

import logging
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from boomerang_model import (
    EdgeDistribution,
    ModelParams,
    Trajectory,
    run_trajectory,
    uniform_edge_distribution,
)
from exceptions import ConfigValidationError, InvalidWeight, NotSingleFaction, UnknownPreset
from experiment_config import PRESET_DEFAULTS, ExperimentConfig, build_config
from signed_graph import (
    ArrangementReport,
    Edge,
    FactionPartition,
    SignedGraph,
    classify_arrangement,
    generate_complete_clustered,
    perturb_flip_edges,
    positive_components,
)
from trajectory_analyzer import (
    absorbing_audit,
    consensus_stop_rule,
    detect_consensus,
    detect_polarization,
    faction_polarization,
    fluctuation_stats,
    monotonicity_audit,
    near_extreme_occupancy,
    polarization_stop_rule,
    separation_time,
)

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA_VERSION = '1.0'

HIT_TIME_QUANTILES = (0.1, 0.5, 0.9)


def preset(name: str, a: float, **overrides) -> ExperimentConfig:
    """
    Config for one of the named experiments with uniform self-weight `a`.

    Args:
        name: fig1, fig2, fig3, fluct_lemma or consensus
        a: Shared self-weight in (0, 1)
        **overrides: Any ExperimentConfig field

    Raises:
        UnknownPreset: name is not a preset
        InvalidWeight: a outside (0, 1)
    """
    if name not in PRESET_DEFAULTS:
        raise UnknownPreset(f"Unknown preset '{name}'; choose from {sorted(PRESET_DEFAULTS)}")
    if not 0.0 < a < 1.0:
        raise InvalidWeight(f"Self-weight a={a} is outside the open interval (0, 1)")
    return build_config({'preset': name, 'self_weight': a, **overrides})


def derive_seeds(master_seed: int, trials: int) -> Tuple[int, List[int]]:
    """(perturbation seed, per-trial seeds) as u64 values spawned from the master seed."""
    children = np.random.SeedSequence(master_seed).spawn(trials + 1)
    seeds = [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
    return seeds[0], seeds[1:]


@dataclass(frozen=True)
class ExperimentSetup:
    """Graph, parameters and regime shared by every trial of an experiment."""

    config: ExperimentConfig
    graph: SignedGraph
    partition: FactionPartition
    params: ModelParams
    distribution: EdgeDistribution
    regime: str
    report: ArrangementReport
    flipped_edges: Tuple[Edge, ...] = ()

    @property
    def n(self) -> int:
        return self.graph.n


def _load_graph(config: ExperimentConfig) -> SignedGraph:
    if config.graph_file is not None:
        from opinion_io import read_graph
        return read_graph(config.graph_file)
    graph, _ = generate_complete_clustered(config.faction_sizes)
    return graph


def _regime_of(report: ArrangementReport) -> str:
    if not report.connected or report.violating_edges:
        return 'unbalanced'
    if report.k == 1:
        return 'consensus'
    return 'polarization' if report.k == 2 else 'clustering'


def prepare_experiment(config: ExperimentConfig) -> ExperimentSetup:
    """
    Build the graph (perturbed when flip_count > 0), parameters and regime.

    Raises:
        ConfigValidationError: config inconsistent with the graph it names
    """
    graph = _load_graph(config)
    partition = positive_components(graph)

    flipped: List[Edge] = []
    if config.flip_count:
        if config.master_seed is None:
            raise ConfigValidationError('master_seed: required for sign perturbation', field_path='master_seed')
        perturbation_seed, _ = derive_seeds(config.master_seed, config.trials)
        graph, flipped = perturb_flip_edges(graph, config.flip_count, np.random.default_rng(perturbation_seed))
        logger.info("Perturbed %d edge signs: %s", len(flipped), flipped)

    report = classify_arrangement(graph)
    regime = _regime_of(report)
    if regime != 'unbalanced':
        partition = report.partition

    if config.self_weights is not None:
        if len(config.self_weights) != graph.n:
            raise ConfigValidationError(
                f"self_weights: expected {graph.n} weights, got {len(config.self_weights)}",
                field_path='self_weights',
            )
        params = ModelParams(o_min=config.o_min, o_max=config.o_max, self_weights=tuple(config.self_weights))
    else:
        params = ModelParams.uniform(graph.n, config.self_weight, config.o_min, config.o_max)

    if config.initial_condition == 'pinned' and partition.k < 2:
        raise ConfigValidationError('initial_condition: pinned needs at least two factions',
                                    field_path='initial_condition')
    if config.initial_opinions is not None and len(config.initial_opinions) != graph.n:
        raise ConfigValidationError(
            f"initial_opinions: expected {graph.n} values, got {len(config.initial_opinions)}",
            field_path='initial_opinions',
        )

    return ExperimentSetup(
        config=config,
        graph=graph,
        partition=partition,
        params=params,
        distribution=uniform_edge_distribution(graph),
        regime=regime,
        report=report,
        flipped_edges=tuple(flipped),
    )


def initial_opinions(setup: ExperimentSetup, rng: np.random.Generator) -> List[float]:
    """
    Initial vector for one trial.

    uniform: i.i.d. uniform on [o_min, o_max]. pinned: the first faction at
    o_min, the second at o_max, everyone else uniform strictly inside.
    fixed: the configured vector.
    """
    config, params = setup.config, setup.params
    if config.initial_condition == 'fixed':
        return [float(v) for v in config.initial_opinions]
    if config.initial_condition == 'uniform':
        return rng.uniform(params.o_min, params.o_max, size=setup.n).tolist()

    interior_low = np.nextafter(params.o_min, params.o_max)
    x = rng.uniform(interior_low, params.o_max, size=setup.n)
    first, second = setup.partition.blocks[0], setup.partition.blocks[1]
    x[list(first)] = params.o_min
    x[list(second)] = params.o_max
    return x.tolist()


def _pinned_agents(setup: ExperimentSetup) -> Tuple[List[int], List[int]]:
    if setup.config.initial_condition != 'pinned':
        return [], []
    return list(setup.partition.blocks[0]), list(setup.partition.blocks[1])


@dataclass(frozen=True)
class TrialSummary:
    """Verdicts and audits of one trial; fields that do not apply to its regime are None."""

    trial: int
    seed: int
    steps: int
    stop_reason: str
    verdict: str
    final_spread: float
    x0_min: float
    x0_max: float
    converged: bool = False
    consensus_value: Optional[float] = None
    within_hull: Optional[bool] = None
    polarized: bool = False
    low_faction: Optional[int] = None
    hit_time: Optional[int] = None
    separation_time: Optional[int] = None
    absorbing: Optional[bool] = None
    monotone: Optional[bool] = None
    polarized_factions: Optional[int] = None
    fluctuating_faction: Optional[int] = None
    clustering_pattern: Optional[bool] = None
    min_visits_low: Optional[int] = None
    min_visits_high: Optional[int] = None
    min_crossings: Optional[int] = None
    pinned_constant: Optional[bool] = None
    near_extreme_occupancy: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def _stop_rule(setup: ExperimentSetup):
    config = setup.config
    if setup.regime == 'consensus':
        return consensus_stop_rule(config.consensus_tol)
    if setup.regime == 'polarization':
        return polarization_stop_rule(setup.partition, setup.params, config.tol)
    return None


def simulate_setup(setup: ExperimentSetup, seed: int, stop_early: Optional[bool] = None) -> Trajectory:
    """
    One seeded trajectory of an experiment; the initial state is drawn from the same stream.

    Args:
        setup: Prepared experiment
        seed: u64 seed of the trial's PCG64 stream
        stop_early: Stop at the regime's verdict (defaults to config.stop_on_verdict)
    """
    config = setup.config
    if stop_early is None:
        stop_early = config.stop_on_verdict
    rng = np.random.default_rng(seed)
    x0 = initial_opinions(setup, rng)
    return run_trajectory(
        setup.graph,
        setup.distribution,
        setup.params,
        x0,
        config.horizon,
        stop=_stop_rule(setup) if stop_early else None,
        rng=rng,
        record_stride=config.record_stride,
        seed=seed,
    )


def _run_trial(setup: ExperimentSetup, trial: int, seed: int) -> TrialSummary:
    config, params = setup.config, setup.params
    traj = simulate_setup(setup, seed)
    x0 = traj.states[0].tolist()

    consensus = detect_consensus(traj, config.consensus_tol)
    fields = {
        'trial': trial,
        'seed': seed,
        'steps': traj.steps,
        'stop_reason': traj.stop_reason,
        'final_spread': consensus.final_spread,
        'x0_min': min(x0),
        'x0_max': max(x0),
        'converged': consensus.converged,
    }
    verdict = 'consensus' if consensus.converged else 'not_yet'

    if setup.regime == 'consensus':
        value = float(traj.states[-1].mean())
        slack = params.rounding_slack
        fields.update(
            consensus_value=value,
            within_hull=min(x0) - slack <= value <= max(x0) + slack,
            hit_time=consensus.hit_time,
        )

    elif setup.regime == 'polarization':
        polarization = detect_polarization(traj, setup.partition, config.tol)
        fields.update(
            polarized=polarization.polarized,
            low_faction=polarization.low_faction,
            hit_time=polarization.hit_time,
            separation_time=separation_time(traj, setup.partition),
            absorbing=absorbing_audit(traj, setup.partition),
            monotone=monotonicity_audit(traj, setup.partition),
        )
        if polarization.polarized:
            verdict = 'polarization'

    elif setup.regime == 'clustering':
        labels = faction_polarization(traj.states[-1], setup.partition, params, config.tol)
        unsettled = [index for index, label in enumerate(labels) if label == 'none']
        low_pinned, high_pinned = _pinned_agents(setup)
        pinned = set(low_pinned) | set(high_pinned)
        if pinned:
            watched = [v for v in range(setup.n) if v not in pinned]
        else:
            watched = [v for index in unsettled for v in setup.partition.blocks[index]]

        center_occupied = False
        if watched:
            stats = fluctuation_stats(traj, watched, config.epsilon)
            center_occupied = all(occupancy[1] > 0 for occupancy in stats.occupancy)
            fields.update(
                min_visits_low=min(stats.visits_low),
                min_visits_high=min(stats.visits_high),
                min_crossings=min(stats.crossings),
            )
        settled = len(labels) - len(unsettled)
        fields.update(
            polarized_factions=settled,
            fluctuating_faction=unsettled[0] if len(unsettled) == 1 else None,
            clustering_pattern=settled == 2 and {'low', 'high'} <= set(labels) and center_occupied,
        )
        if pinned:
            fields['pinned_constant'] = bool(
                np.all(traj.states[:, low_pinned] == params.o_min)
                and np.all(traj.states[:, high_pinned] == params.o_max)
            )

    else:
        fields['near_extreme_occupancy'] = near_extreme_occupancy(traj, None, config.epsilon)

    logger.debug("Trial %d (seed %d): %s after %d steps", trial, seed, verdict, traj.steps)
    return TrialSummary(verdict=verdict, **fields)


def _quantiles(values: Sequence[float]) -> Optional[Dict[str, float]]:
    if not values:
        return None
    points = np.quantile(np.asarray(values, dtype=float), HIT_TIME_QUANTILES)
    return {f"q{int(q * 100):02d}": float(p) for q, p in zip(HIT_TIME_QUANTILES, points)}


def _all_or_none(values: Sequence[Optional[bool]]) -> Optional[bool]:
    present = [v for v in values if v is not None]
    return all(present) if present else None


def _min_or_none(values: Sequence[Optional[int]]) -> Optional[int]:
    present = [v for v in values if v is not None]
    return min(present) if present else None


@dataclass(frozen=True)
class ExperimentSummary:
    """Aggregate of every trial, reduced in trial order."""

    config: ExperimentConfig
    regime: str
    trials: Tuple[TrialSummary, ...]
    flipped_edges: Tuple[Edge, ...] = ()
    factions: Tuple[Tuple[int, ...], ...] = field(default=())

    @property
    def trial_count(self) -> int:
        return len(self.trials)

    @property
    def polarized_count(self) -> int:
        return sum(t.polarized for t in self.trials)

    @property
    def converged_count(self) -> int:
        return sum(t.converged for t in self.trials)

    @property
    def fraction_polarized(self) -> float:
        return self.polarized_count / self.trial_count

    @property
    def fraction_converged(self) -> float:
        return self.converged_count / self.trial_count

    @property
    def hit_times(self) -> List[int]:
        return [t.hit_time for t in self.trials if t.hit_time is not None]

    @property
    def hit_time_quantiles(self) -> Optional[Dict[str, float]]:
        return _quantiles(self.hit_times)

    @property
    def median_hit_time(self) -> Optional[float]:
        return float(np.median(self.hit_times)) if self.hit_times else None

    @property
    def consensus_values(self) -> List[float]:
        return [t.consensus_value for t in self.trials if t.consensus_value is not None]

    @property
    def all_within_hull(self) -> Optional[bool]:
        return _all_or_none([t.within_hull for t in self.trials])

    @property
    def all_absorbing(self) -> Optional[bool]:
        return _all_or_none([t.absorbing for t in self.trials])

    @property
    def all_monotone(self) -> Optional[bool]:
        return _all_or_none([t.monotone for t in self.trials])

    @property
    def pinned_constant(self) -> Optional[bool]:
        return _all_or_none([t.pinned_constant for t in self.trials])

    @property
    def clustering_pattern_frequency(self) -> Optional[float]:
        flags = [t.clustering_pattern for t in self.trials if t.clustering_pattern is not None]
        return sum(flags) / len(flags) if flags else None

    @property
    def fluctuating_faction_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for t in self.trials:
            if t.fluctuating_faction is not None:
                counts[t.fluctuating_faction] = counts.get(t.fluctuating_faction, 0) + 1
        return dict(sorted(counts.items()))

    @property
    def mean_near_extreme_occupancy(self) -> Optional[float]:
        values = [t.near_extreme_occupancy for t in self.trials if t.near_extreme_occupancy is not None]
        return float(np.mean(values)) if values else None

    def aggregates(self) -> Dict:
        return {
            'trials': self.trial_count,
            'polarized': self.polarized_count,
            'converged': self.converged_count,
            'fraction_polarized': self.fraction_polarized,
            'fraction_converged': self.fraction_converged,
            'hit_time_quantiles': self.hit_time_quantiles,
            'median_hit_time': self.median_hit_time,
            'consensus_values': self.consensus_values,
            'all_within_hull': self.all_within_hull,
            'all_absorbing': self.all_absorbing,
            'all_monotone': self.all_monotone,
            'clustering_pattern_frequency': self.clustering_pattern_frequency,
            'fluctuating_faction_counts': {str(k): v for k, v in self.fluctuating_faction_counts.items()},
            'min_visits_low': _min_or_none([t.min_visits_low for t in self.trials]),
            'min_visits_high': _min_or_none([t.min_visits_high for t in self.trials]),
            'min_crossings': _min_or_none([t.min_crossings for t in self.trials]),
            'pinned_constant': self.pinned_constant,
            'mean_near_extreme_occupancy': self.mean_near_extreme_occupancy,
        }

    def to_dict(self) -> Dict:
        return {
            'schema_version': SUMMARY_SCHEMA_VERSION,
            'config': self.config.to_dict(),
            'regime': self.regime,
            'factions': [list(block) for block in self.factions],
            'flipped_edges': [list(edge) for edge in self.flipped_edges],
            'aggregates': self.aggregates(),
            'trials': [t.to_dict() for t in self.trials],
        }

    def trials_frame(self) -> pd.DataFrame:
        """One row per trial, in trial order."""
        return pd.DataFrame([t.to_dict() for t in self.trials], columns=list(TrialSummary.__dataclass_fields__))


def _run_trial_args(args):
    return _run_trial(*args)


def run_monte_carlo(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentSummary:
    """
    Run `config.trials` independent seeded trials and aggregate them.

    Args:
        config: Validated experiment config with a master seed
        workers: Process count (defaults to config.workers); output is identical for any value

    Returns:
        ExperimentSummary
    """
    if config.master_seed is None:
        raise ConfigValidationError('master_seed: required to run an experiment', field_path='master_seed')
    setup = prepare_experiment(config)
    _, seeds = derive_seeds(config.master_seed, config.trials)
    jobs = [(setup, trial, seed) for trial, seed in enumerate(seeds)]
    workers = workers or config.workers

    logger.info("Running %d trials (%s regime, n=%d, horizon=%d, workers=%d)",
                config.trials, setup.regime, setup.n, config.horizon, workers)
    if workers > 1:
        with Pool(min(workers, len(jobs))) as pool:
            trials = pool.map(_run_trial_args, jobs)
    else:
        trials = [_run_trial(*job) for job in jobs]

    summary = ExperimentSummary(
        config=config,
        regime=setup.regime,
        trials=tuple(trials),
        flipped_edges=setup.flipped_edges,
        factions=setup.partition.blocks,
    )
    logger.info("Finished: %d/%d polarized, %d/%d converged",
                summary.polarized_count, summary.trial_count, summary.converged_count, summary.trial_count)
    return summary


@dataclass(frozen=True)
class ConsensusSamples:
    """Per-trial consensus values with the initial hull each must lie in."""

    values: Tuple[float, ...]
    hull_low: Tuple[float, ...]
    hull_high: Tuple[float, ...]
    converged: Tuple[bool, ...]

    @property
    def within_hull(self) -> Tuple[bool, ...]:
        return tuple(lo <= c <= hi for c, lo, hi in zip(self.values, self.hull_low, self.hull_high))

    @property
    def all_within_hull(self) -> bool:
        return all(self.within_hull)


def consensus_value_samples(config: ExperimentConfig) -> ConsensusSamples:
    """
    Consensus values over seeded trials of a single-faction experiment.

    Raises:
        NotSingleFaction: the configured graph does not have exactly one faction
    """
    setup = prepare_experiment(config)
    if setup.regime != 'consensus':
        raise NotSingleFaction(
            f"Consensus values need one all-positive faction; graph regime is {setup.regime} "
            f"with k={setup.report.k}"
        )
    summary = run_monte_carlo(config)
    slack = setup.params.rounding_slack
    return ConsensusSamples(
        values=tuple(t.consensus_value for t in summary.trials),
        hull_low=tuple(t.x0_min - slack for t in summary.trials),
        hull_high=tuple(t.x0_max + slack for t in summary.trials),
        converged=tuple(t.converged for t in summary.trials),
    )


if __name__ == '__main__':
    # Small two-faction run
    print("Running fig1 preset (a=0.5, 10 trials)...")
    summary = run_monte_carlo(preset('fig1', 0.5, trials=10, horizon=50_000, master_seed=1))
    print(f"Regime: {summary.regime}")
    print(f"Polarized: {summary.polarized_count}/{summary.trial_count} ({summary.fraction_polarized:.0%})")
    print(f"Median hit time: {summary.median_hit_time}")

    summary.trials_frame().to_csv('fig1_trials.csv', index=False)
    print("\nSaved to fig1_trials.csv")
