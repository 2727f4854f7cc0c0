"""
Trajectory Analyzer

Runtime detectors and statistics over recorded trajectories: spread, the
two-faction separation classifier and its absorbing property, faction
extremum series, consensus / polarization verdicts and epsilon-band
fluctuation statistics.

Every function is pure; trajectories are read, never modified.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from boomerang_model import ModelParams, OpinionState, StopRule, Trajectory
from exceptions import InvalidEpsilon, InvalidParams, NeverSeparated, WrongFactionCount
from signed_graph import FactionPartition

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = '1.0'

StateLike = Union[OpinionState, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class SeparationClass:
    """z = 2 when one faction lies strictly below the other, else z = 1."""

    z: int
    low_faction: Optional[int] = None
    high_faction: Optional[int] = None
    gap: Optional[float] = None

    def to_dict(self):
        return {
            'z': self.z,
            'low_faction': self.low_faction,
            'high_faction': self.high_faction,
            'gap': self.gap,
        }


@dataclass(frozen=True, eq=False)
class ExtremumSeries:
    """
    Max of the low faction and min of the high faction at every recorded state.

    Faction roles are fixed by the first separated state, recorded at
    `separation_index`.
    """

    times: np.ndarray
    theta_low: np.ndarray
    theta_high: np.ndarray
    low_faction: int
    high_faction: int
    separation_index: int


@dataclass(frozen=True)
class ConsensusVerdict:
    converged: bool
    value: Optional[float]
    hit_time: Optional[int]
    final_spread: float

    def to_dict(self):
        return {
            'converged': self.converged,
            'value': self.value,
            'hit_time': self.hit_time,
            'final_spread': self.final_spread,
        }


@dataclass(frozen=True)
class PolarizationVerdict:
    polarized: bool
    low_faction: Optional[int] = None
    high_faction: Optional[int] = None
    hit_time: Optional[int] = None

    def to_dict(self):
        return {
            'polarized': self.polarized,
            'low_faction': self.low_faction,
            'high_faction': self.high_faction,
            'hit_time': self.hit_time,
        }


@dataclass(frozen=True)
class FluctuationStats:
    """
    Per-agent epsilon-band statistics over the recorded states.

    The low band is [o_min, o_min + eps), the high band (o_max - eps, o_max]
    and the center band everything in between, so the three occupancy
    fractions of an agent sum to 1.
    """

    epsilon: float
    agents: Tuple[int, ...]
    visits_low: Tuple[int, ...]
    visits_high: Tuple[int, ...]
    crossings: Tuple[int, ...]
    occupancy: Tuple[Tuple[float, float, float], ...]

    def for_agent(self, agent: int) -> Dict:
        r = self.agents.index(agent)
        low, center, high = self.occupancy[r]
        return {
            'agent': agent,
            'visits_low': self.visits_low[r],
            'visits_high': self.visits_high[r],
            'crossings': self.crossings[r],
            'occupancy': {'low': low, 'center': center, 'high': high},
        }

    def to_dict(self):
        return {
            'epsilon': self.epsilon,
            'agents': [self.for_agent(agent) for agent in self.agents],
        }


def _as_vector(state: StateLike) -> np.ndarray:
    if isinstance(state, OpinionState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def _require_two_factions(partition: FactionPartition):
    if partition.k != 2:
        raise WrongFactionCount(f"Need exactly 2 factions, partition has {partition.k}")


def _require_tolerance(tol: float):
    if not tol > 0:
        raise InvalidParams(f"Tolerance must be > 0, got {tol}")


def _require_band(epsilon: float, params: ModelParams):
    if not 0 < epsilon < params.span / 2:
        raise InvalidEpsilon(
            f"epsilon must lie in (0, {params.span / 2}) for bounds "
            f"[{params.o_min}, {params.o_max}], got {epsilon}"
        )


def spread(state: StateLike) -> float:
    """max_i x_i - min_i x_i"""
    x = _as_vector(state)
    if x.size == 0:
        raise InvalidParams("Spread of an empty state is undefined")
    return float(x.max() - x.min())


def classify_separation(state: StateLike, partition: FactionPartition) -> SeparationClass:
    """
    Strict max/min separation test between the two factions.

    Raises:
        WrongFactionCount: partition does not have exactly 2 blocks
    """
    _require_two_factions(partition)
    x = _as_vector(state)
    first, second = (x[list(block)] for block in partition.blocks)
    if first.max() < second.min():
        return SeparationClass(z=2, low_faction=0, high_faction=1, gap=float(second.min() - first.max()))
    if second.max() < first.min():
        return SeparationClass(z=2, low_faction=1, high_faction=0, gap=float(first.min() - second.max()))
    return SeparationClass(z=1)


def _separation_codes(states: np.ndarray, partition: FactionPartition) -> np.ndarray:
    """0 where z = 1, otherwise 1 + index of the low faction, per recorded state."""
    first, second = (list(block) for block in partition.blocks)
    first_low = states[:, first].max(axis=1) < states[:, second].min(axis=1)
    second_low = states[:, second].max(axis=1) < states[:, first].min(axis=1)
    return np.where(first_low, 1, np.where(second_low, 2, 0))


def separation_time(traj: Trajectory, partition: FactionPartition) -> Optional[int]:
    """First recorded time with z = 2, or None."""
    _require_two_factions(partition)
    separated = np.flatnonzero(_separation_codes(traj.states, partition))
    return int(traj.times[separated[0]]) if separated.size else None


def extremum_series(traj: Trajectory, partition: FactionPartition) -> ExtremumSeries:
    """
    Raises:
        WrongFactionCount: partition does not have exactly 2 blocks
        NeverSeparated: no recorded state has z = 2
    """
    _require_two_factions(partition)
    codes = _separation_codes(traj.states, partition)
    separated = np.flatnonzero(codes)
    if not separated.size:
        raise NeverSeparated("Trajectory never reaches a separated state")
    first = int(separated[0])
    low = int(codes[first]) - 1
    high = 1 - low
    theta_low = traj.states[:, list(partition.blocks[low])].max(axis=1)
    theta_high = traj.states[:, list(partition.blocks[high])].min(axis=1)
    return ExtremumSeries(
        times=traj.times,
        theta_low=theta_low,
        theta_high=theta_high,
        low_faction=low,
        high_faction=high,
        separation_index=first,
    )


def monotonicity_audit(traj: Trajectory, partition: FactionPartition) -> bool:
    """After separation theta_low never rises and theta_high never falls; true if never separated."""
    try:
        series = extremum_series(traj, partition)
    except NeverSeparated:
        return True
    start = series.separation_index
    low_ok = np.all(np.diff(series.theta_low[start:]) <= 0)
    high_ok = np.all(np.diff(series.theta_high[start:]) >= 0)
    return bool(low_ok and high_ok)


def absorbing_audit(traj: Trajectory, partition: FactionPartition) -> bool:
    """True iff every separated recorded state is followed by one with the same orientation."""
    _require_two_factions(partition)
    codes = _separation_codes(traj.states, partition)
    before, after = codes[:-1], codes[1:]
    return bool(np.all((before == 0) | (after == before)))


def detect_consensus(traj: Trajectory, tol: float) -> ConsensusVerdict:
    """
    Consensus verdict at the final recorded state.

    The hit time is the first recorded time whose spread is below `tol`;
    value and hit time are None when the final state has not converged.
    """
    _require_tolerance(tol)
    spreads = traj.states.max(axis=1) - traj.states.min(axis=1)
    final_spread = float(spreads[-1])
    if not final_spread < tol:
        return ConsensusVerdict(converged=False, value=None, hit_time=None, final_spread=final_spread)
    hit = int(np.flatnonzero(spreads < tol)[0])
    return ConsensusVerdict(
        converged=True,
        value=float(traj.states[-1].mean()),
        hit_time=int(traj.times[hit]),
        final_spread=final_spread,
    )


def _near_bounds(states: np.ndarray, params: ModelParams, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    return states - params.o_min < tol, params.o_max - states < tol


def _orientation_masks(states: np.ndarray, partition: FactionPartition, params: ModelParams,
                       tol: float) -> Tuple[np.ndarray, np.ndarray]:
    near_low, near_high = _near_bounds(states, params, tol)
    first, second = (list(block) for block in partition.blocks)
    first_low = near_low[:, first].all(axis=1) & near_high[:, second].all(axis=1)
    second_low = near_low[:, second].all(axis=1) & near_high[:, first].all(axis=1)
    return first_low, second_low


def detect_polarization(traj: Trajectory, partition: FactionPartition, tol: float) -> PolarizationVerdict:
    """
    Polarization verdict at the final recorded state, in either orientation.

    Raises:
        WrongFactionCount: partition does not have exactly 2 blocks
    """
    _require_two_factions(partition)
    _require_tolerance(tol)
    first_low, second_low = _orientation_masks(traj.states, partition, traj.params, tol)
    for low, mask in ((0, first_low), (1, second_low)):
        if mask[-1]:
            hit = int(np.flatnonzero(mask)[0])
            return PolarizationVerdict(
                polarized=True,
                low_faction=low,
                high_faction=1 - low,
                hit_time=int(traj.times[hit]),
            )
    return PolarizationVerdict(polarized=False)


def _band_labels(states: np.ndarray, params: ModelParams, epsilon: float) -> np.ndarray:
    """-1 in the low band, +1 in the high band, 0 in the center band."""
    low = states < params.o_min + epsilon
    high = states > params.o_max - epsilon
    return np.where(low, -1, np.where(high, 1, 0)).astype(np.int8)


def _resolve_agents(traj: Trajectory, agents: Optional[Sequence[int]]) -> List[int]:
    n = traj.states.shape[1]
    if agents is None:
        return list(range(n))
    resolved = [int(a) for a in agents]
    for agent in resolved:
        if not 0 <= agent < n:
            raise InvalidParams(f"Agent {agent} is outside [0, {n})")
    return resolved


def fluctuation_stats(traj: Trajectory, agents: Optional[Sequence[int]], epsilon: float) -> FluctuationStats:
    """
    Band visits, alternations and occupancy for the chosen agents.

    A visit counts each entry into a band from outside it; the initial state
    is not an entry. A crossing counts each switch between the low and high
    bands, with any stay in the center band in between ignored.

    Args:
        traj: Recorded trajectory
        agents: Agents to report on (all agents when None)
        epsilon: Band width, 0 < epsilon < (o_max - o_min) / 2

    Raises:
        InvalidEpsilon: epsilon outside the admissible range
    """
    _require_band(epsilon, traj.params)
    chosen = _resolve_agents(traj, agents)
    labels = _band_labels(traj.states[:, chosen], traj.params, epsilon)
    records = labels.shape[0]

    visits_low, visits_high, crossings, occupancy = [], [], [], []
    for column in labels.T:
        entered = column[1:] != column[:-1]
        visits_low.append(int(np.count_nonzero(entered & (column[1:] == -1))))
        visits_high.append(int(np.count_nonzero(entered & (column[1:] == 1))))
        extremes = column[column != 0]
        crossings.append(int(np.count_nonzero(extremes[1:] != extremes[:-1])))
        occupancy.append(tuple(float(np.count_nonzero(column == band)) / records for band in (-1, 0, 1)))

    return FluctuationStats(
        epsilon=float(epsilon),
        agents=tuple(chosen),
        visits_low=tuple(visits_low),
        visits_high=tuple(visits_high),
        crossings=tuple(crossings),
        occupancy=tuple(occupancy),
    )


def near_extreme_occupancy(traj: Trajectory, agents: Optional[Sequence[int]], epsilon: float) -> float:
    """Fraction of recorded (agent, time) samples inside the low or high band."""
    _require_band(epsilon, traj.params)
    labels = _band_labels(traj.states[:, _resolve_agents(traj, agents)], traj.params, epsilon)
    return float(np.count_nonzero(labels)) / labels.size


def faction_polarization(state: StateLike, partition: FactionPartition, params: ModelParams,
                         tol: float) -> Tuple[str, ...]:
    """'low', 'high' or 'none' per faction: whether all its members sit within tol of a bound."""
    _require_tolerance(tol)
    x = _as_vector(state)
    labels = []
    for block in partition.blocks:
        values = x[list(block)]
        if np.all(values - params.o_min < tol):
            labels.append('low')
        elif np.all(params.o_max - values < tol):
            labels.append('high')
        else:
            labels.append('none')
    return tuple(labels)


def consensus_stop_rule(tol: float) -> StopRule:
    _require_tolerance(tol)

    def stop(state: OpinionState) -> bool:
        return max(state.x) - min(state.x) < tol

    return stop


def polarization_stop_rule(partition: FactionPartition, params: ModelParams, tol: float) -> StopRule:
    _require_two_factions(partition)
    _require_tolerance(tol)
    first, second = (list(block) for block in partition.blocks)
    o_min, o_max = params.o_min, params.o_max

    def pinned(x, low, high):
        return all(x[i] - o_min < tol for i in low) and all(o_max - x[i] < tol for i in high)

    def stop(state: OpinionState) -> bool:
        return pinned(state.x, first, second) or pinned(state.x, second, first)

    return stop


@dataclass(frozen=True)
class AnalysisReport:
    """Everything TrajectoryAnalyzer.analyze() found, ready for JSON export."""

    verdict: str
    steps: int
    record_count: int
    stop_reason: str
    seed: Optional[int]
    consensus: ConsensusVerdict
    polarization: Optional[PolarizationVerdict]
    separation: Optional[SeparationClass]
    separation_time: Optional[int]
    absorbing: Optional[bool]
    monotone: Optional[bool]
    faction_labels: Optional[Tuple[str, ...]]
    fluctuation: Optional[FluctuationStats]

    @property
    def c(self) -> Optional[float]:
        return self.consensus.value

    @property
    def hit_time(self) -> Optional[int]:
        if self.verdict == 'consensus':
            return self.consensus.hit_time
        if self.verdict == 'polarization':
            return self.polarization.hit_time
        return None

    @property
    def orientation(self) -> Optional[Dict[str, int]]:
        if self.polarization is None or not self.polarization.polarized:
            return None
        return {'low_faction': self.polarization.low_faction, 'high_faction': self.polarization.high_faction}

    def to_dict(self):
        return {
            'schema_version': REPORT_SCHEMA_VERSION,
            'verdict': self.verdict,
            'c': self.c,
            'hit_time': self.hit_time,
            'orientation': self.orientation,
            'steps': self.steps,
            'record_count': self.record_count,
            'stop_reason': self.stop_reason,
            'seed': self.seed,
            'consensus': self.consensus.to_dict(),
            'polarization': self.polarization.to_dict() if self.polarization else None,
            'separation': self.separation.to_dict() if self.separation else None,
            'separation_time': self.separation_time,
            'absorbing': self.absorbing,
            'monotone': self.monotone,
            'faction_labels': list(self.faction_labels) if self.faction_labels else None,
            'fluctuation': self.fluctuation.to_dict() if self.fluctuation else None,
        }


class TrajectoryAnalyzer:
    """Runs the detectors that apply to a trajectory's faction structure."""

    def __init__(
        self,
        traj: Trajectory,
        partition: Optional[FactionPartition] = None,
        tol: float = 1e-3,
        epsilon: Optional[float] = 0.1,
        agents: Optional[Sequence[int]] = None,
        consensus_tol: Optional[float] = None,
    ):
        """
        Args:
            traj: Trajectory to analyze
            partition: Factions of the trajectory's graph; polarization and
                separation checks need exactly two
            tol: Polarization tolerance
            epsilon: Band width for fluctuation statistics; None skips them
            agents: Agents for fluctuation statistics (all when None)
            consensus_tol: Spread threshold for consensus (defaults to tol)
        """
        _require_tolerance(tol)
        self.traj = traj
        self.partition = partition
        self.tol = tol
        self.consensus_tol = tol if consensus_tol is None else consensus_tol
        self.epsilon = epsilon
        self.agents = agents

    def analyze(self) -> AnalysisReport:
        traj, partition = self.traj, self.partition
        consensus = detect_consensus(traj, self.consensus_tol)

        polarization = separation = sep_time = absorbing = monotone = labels = None
        if partition is not None and partition.k == 2:
            polarization = detect_polarization(traj, partition, self.tol)
            separation = classify_separation(traj.states[-1], partition)
            sep_time = separation_time(traj, partition)
            absorbing = absorbing_audit(traj, partition)
            monotone = monotonicity_audit(traj, partition)
        if partition is not None:
            labels = faction_polarization(traj.states[-1], partition, traj.params, self.tol)

        fluctuation = None
        if self.epsilon is not None:
            fluctuation = fluctuation_stats(traj, self.agents, self.epsilon)

        if consensus.converged:
            verdict = 'consensus'
        elif polarization is not None and polarization.polarized:
            verdict = 'polarization'
        else:
            verdict = 'not_yet'
        logger.debug("Analysis verdict %s after %d steps", verdict, traj.steps)

        return AnalysisReport(
            verdict=verdict,
            steps=traj.steps,
            record_count=traj.record_count,
            stop_reason=traj.stop_reason,
            seed=traj.seed,
            consensus=consensus,
            polarization=polarization,
            separation=separation,
            separation_time=sep_time,
            absorbing=absorbing,
            monotone=monotone,
            faction_labels=labels,
            fluctuation=fluctuation,
        )
