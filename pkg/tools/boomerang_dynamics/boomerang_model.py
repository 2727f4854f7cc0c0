"""
Affine Boomerang Model

Pairwise update rule, edge selection distributions, seeded trajectory
simulation and deterministic replay of prescribed edge sequences.

Positive pairs average toward each other; negative pairs push apart, the
lower agent toward o_min and the other toward o_max. Both endpoints update
from their time-t values.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import (
    EmptyEdgeSet,
    InvalidDistribution,
    InvalidEdge,
    InvalidInitialOpinion,
    InvalidParams,
    InvalidSign,
    InvalidWeight,
    OpinionRangeError,
    UnknownEdge,
)
from signed_graph import Edge, SignedGraph, normalize_edge

logger = logging.getLogger(__name__)

# Uniform draws are taken from the generator in blocks of this size.
SAMPLE_BLOCK = 1 << 16

# Values outside the bounds by at most this many units in the last place are rounding.
ROUNDING_ULPS = 4

StopRule = Callable[['OpinionState'], bool]


@dataclass(frozen=True)
class ModelParams:
    """Opinion bounds and per-agent self-weights."""

    o_min: float
    o_max: float
    self_weights: Tuple[float, ...]

    def __post_init__(self):
        o_min, o_max = float(self.o_min), float(self.o_max)
        if not (math.isfinite(o_min) and math.isfinite(o_max)) or not o_min < o_max:
            raise InvalidParams(f"Need finite o_min < o_max, got [{self.o_min}, {self.o_max}]")
        weights = tuple(float(a) for a in self.self_weights)
        if not weights:
            raise InvalidParams("self_weights must name at least one agent")
        for index, a in enumerate(weights):
            if not 0.0 < a < 1.0:
                raise InvalidWeight(f"Self-weight a_{index}={a} is outside the open interval (0, 1)")
        object.__setattr__(self, 'o_min', o_min)
        object.__setattr__(self, 'o_max', o_max)
        object.__setattr__(self, 'self_weights', weights)

    @classmethod
    def uniform(cls, n: int, a: float, o_min: float = 0.0, o_max: float = 1.0) -> 'ModelParams':
        """Every agent has self-weight `a`."""
        return cls(o_min=o_min, o_max=o_max, self_weights=(a,) * n)

    @property
    def n(self) -> int:
        return len(self.self_weights)

    @property
    def span(self) -> float:
        return self.o_max - self.o_min

    @property
    def rounding_slack(self) -> float:
        return ROUNDING_ULPS * max(math.ulp(self.o_min), math.ulp(self.o_max))

    def to_dict(self):
        return {'o_min': self.o_min, 'o_max': self.o_max, 'self_weights': list(self.self_weights)}


@dataclass(frozen=True)
class EdgeDistribution:
    """Time-invariant selection probabilities over edges in ascending (i, j) order."""

    edges: Tuple[Edge, ...]
    probabilities: Tuple[float, ...]
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.edges) != len(self.probabilities):
            raise InvalidDistribution("edges and probabilities differ in length")
        if not self.edges:
            raise EmptyEdgeSet("An edge distribution needs at least one edge")
        if list(self.edges) != sorted(set(self.edges)):
            raise InvalidDistribution("Edges must be unique and in ascending order")
        probabilities = np.asarray(self.probabilities, dtype=float)
        if not np.all(np.isfinite(probabilities)) or np.any(probabilities <= 0):
            raise InvalidDistribution("Every edge needs a positive selection probability")
        if abs(float(probabilities.sum()) - 1.0) > 1e-12:
            raise InvalidDistribution(f"Probabilities sum to {probabilities.sum()!r}, not 1")

        probabilities = probabilities / probabilities.sum()
        cdf = np.cumsum(probabilities)
        if np.any(cdf[:-1] >= 1.0):
            raise InvalidDistribution(
                f"Edge {self.edges[-1]} has probability {probabilities[-1]!r}, too small to ever be sampled"
            )
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, 'probabilities', tuple(float(p) for p in probabilities))
        object.__setattr__(self, '_cdf', cdf)

    @property
    def m(self) -> int:
        return len(self.edges)

    def probability(self, i: int, j: int) -> float:
        try:
            return self.probabilities[self.edges.index(normalize_edge(i, j))]
        except ValueError:
            raise UnknownEdge(f"Edge ({i}, {j}) has no selection probability") from None

    def sample_index(self, u: float) -> int:
        """Inverse-CDF lookup of a uniform draw u in [0, 1)."""
        return int(np.searchsorted(self._cdf, u, side='right'))

    def sample_indices(self, draws: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._cdf, draws, side='right')

    def check_graph(self, g: SignedGraph):
        if self.edges != g.pairs:
            raise InvalidDistribution("Distribution edges do not match the graph's edge set")


@dataclass(frozen=True)
class OpinionState:
    """Opinion vector x(t) at time step t."""

    x: Tuple[float, ...]
    t: int = 0

    @property
    def n(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array(self.x, dtype=float)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Recorded realisation of the process.

    `states[r]` is x(times[r]); `edge_log[t]` is the edge selected at step t,
    complete even when states are recorded with a stride.
    """

    graph: SignedGraph
    params: ModelParams
    times: np.ndarray
    states: np.ndarray
    edge_log: np.ndarray
    seed: Optional[int] = None
    stride: int = 1
    stop_reason: str = 'horizon'

    def __post_init__(self):
        for array in (self.times, self.states, self.edge_log):
            array.setflags(write=False)

    @property
    def steps(self) -> int:
        return len(self.edge_log)

    @property
    def record_count(self) -> int:
        return len(self.times)

    def state_at(self, index: int) -> OpinionState:
        return OpinionState(x=tuple(self.states[index].tolist()), t=int(self.times[index]))

    @property
    def initial_state(self) -> OpinionState:
        return self.state_at(0)

    @property
    def final_state(self) -> OpinionState:
        return self.state_at(-1)

    def edge_sequence(self) -> List[Edge]:
        return [(int(i), int(j)) for i, j in self.edge_log.tolist()]


def uniform_edge_distribution(g: SignedGraph) -> EdgeDistribution:
    """p_ij = 1/m for every edge."""
    if g.edge_count == 0:
        raise EmptyEdgeSet("Graph has no edges to select")
    p = 1.0 / g.edge_count
    return EdgeDistribution(edges=g.pairs, probabilities=(p,) * g.edge_count)


def weighted_edge_distribution(g: SignedGraph, weights: Mapping[Edge, float]) -> EdgeDistribution:
    """
    Selection probabilities proportional to positive per-edge weights.

    Args:
        g: Signed graph
        weights: Weight for every edge of g, keyed by (i, j) in either order
    """
    if g.edge_count == 0:
        raise EmptyEdgeSet("Graph has no edges to select")
    normalized = {normalize_edge(*pair): float(w) for pair, w in weights.items()}
    if set(normalized) != set(g.pairs):
        raise InvalidDistribution("Weights must cover exactly the graph's edges")
    values = np.array([normalized[pair] for pair in g.pairs])
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InvalidDistribution("Edge weights must be positive")
    return EdgeDistribution(edges=g.pairs, probabilities=tuple((values / values.sum()).tolist()))


def _affine(a: float, value: float, target: float) -> float:
    """a * value + (1 - a) * target, evaluated as a step from value toward target."""
    if value == target:
        return value
    moved = value + (1.0 - a) * (target - value)
    # never past the target
    return min(moved, target) if value < target else max(moved, target)


def _bounded(value: float, o_min: float, o_max: float, slack: float) -> float:
    if value < o_min:
        if o_min - value > slack:
            raise OpinionRangeError(f"Opinion {value!r} fell below o_min={o_min!r}")
        return o_min
    if value > o_max:
        if value - o_max > slack:
            raise OpinionRangeError(f"Opinion {value!r} rose above o_max={o_max!r}")
        return o_max
    return value


def _update_pair(x: List[float], i: int, j: int, sign: int, weights: Sequence[float],
                 o_min: float, o_max: float, slack: float):
    """Apply one pairwise update to `x` in place."""
    xi, xj = x[i], x[j]
    if sign > 0:
        target_i, target_j = xj, xi
    elif xi < xj:
        target_i, target_j = o_min, o_max
    elif xj < xi:
        target_i, target_j = o_max, o_min
    else:
        # tie: both satisfy x_i >= x_j
        target_i = target_j = o_max
    x[i] = _bounded(_affine(weights[i], xi, target_i), o_min, o_max, slack)
    x[j] = _bounded(_affine(weights[j], xj, target_j), o_min, o_max, slack)


def pair_update(state: OpinionState, edge: Sequence[int], sign: int, params: ModelParams) -> OpinionState:
    """
    Update both endpoints of `edge` simultaneously.

    Args:
        state: Current opinions
        edge: Pair (i, j), i != j
        sign: +1 or -1
        params: Bounds and self-weights

    Returns:
        New OpinionState at t + 1
    """
    if state.n != params.n:
        raise InvalidParams(f"State has {state.n} agents, params have {params.n}")
    i, j = (int(v) for v in edge)
    if i == j or not (0 <= i < state.n and 0 <= j < state.n):
        raise InvalidEdge(f"({i}, {j}) is not a valid pair of distinct agents")
    if sign not in (1, -1):
        raise InvalidSign(f"Sign must be +1 or -1, got {sign}")

    x = list(state.x)
    _update_pair(x, i, j, sign, params.self_weights, params.o_min, params.o_max, params.rounding_slack)
    return OpinionState(x=tuple(x), t=state.t + 1)


def step(state: OpinionState, g: SignedGraph, dist: EdgeDistribution, params: ModelParams,
         rng: np.random.Generator) -> Tuple[OpinionState, Edge]:
    """Sample one edge from `dist` and apply the update."""
    if not (state.n == g.n == params.n):
        raise InvalidParams("State, graph and params disagree on the number of agents")
    edge = dist.edges[dist.sample_index(rng.random())]
    return pair_update(state, edge, g.sign(*edge), params), edge


def validate_initial_opinions(x0: Iterable[float], params: ModelParams) -> List[float]:
    values = [float(v) for v in x0]
    if len(values) != params.n:
        raise InvalidInitialOpinion(f"Expected {params.n} initial opinions, got {len(values)}")
    for index, value in enumerate(values):
        if not (params.o_min <= value <= params.o_max):
            raise InvalidInitialOpinion(
                f"x_{index}(0)={value!r} is outside [{params.o_min}, {params.o_max}]"
            )
    return values


class _Recorder:
    """Collects strided snapshots into a preallocated matrix."""

    def __init__(self, n: int, expected_steps: int, stride: int):
        capacity = expected_steps // stride + 2
        self.times = np.empty(capacity, dtype=np.int64)
        self.states = np.empty((capacity, n), dtype=float)
        self.count = 0

    def record(self, t: int, x: List[float]):
        self.times[self.count] = t
        self.states[self.count] = x
        self.count += 1

    def last_time(self) -> int:
        return int(self.times[self.count - 1])

    def finish(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.times[:self.count].copy(), self.states[:self.count].copy()


def run_trajectory(
    g: SignedGraph,
    dist: EdgeDistribution,
    params: ModelParams,
    x0: Iterable[float],
    horizon: int,
    stop: Optional[StopRule] = None,
    rng: Optional[np.random.Generator] = None,
    record_stride: int = 1,
    seed: Optional[int] = None,
) -> Trajectory:
    """
    Simulate the model from x0.

    Args:
        g: Signed graph
        dist: Edge selection distribution over g's edges
        params: Bounds and self-weights
        x0: Initial opinions in [o_min, o_max]
        horizon: Maximum number of steps
        stop: Predicate on the recorded state; checked every `record_stride` steps
        rng: Random stream; built from `seed` when omitted
        record_stride: Record every this many steps (the final state is always kept)
        seed: Seed for a fresh PCG64 stream, stored on the trajectory

    Returns:
        Trajectory
    """
    if rng is None:
        if seed is None:
            raise InvalidParams("run_trajectory needs an rng or a seed")
        rng = np.random.default_rng(seed)
    if not (g.n == params.n):
        raise InvalidParams(f"Graph has {g.n} agents, params have {params.n}")
    dist.check_graph(g)
    if horizon < 0:
        raise InvalidParams(f"horizon must be >= 0, got {horizon}")
    if record_stride < 1:
        raise InvalidParams(f"record_stride must be >= 1, got {record_stride}")

    x = validate_initial_opinions(x0, params)
    weights, o_min, o_max, slack = params.self_weights, params.o_min, params.o_max, params.rounding_slack
    edge_i = [i for i, _ in dist.edges]
    edge_j = [j for _, j in dist.edges]
    signs = [g.sign(i, j) for i, j in dist.edges]

    recorder = _Recorder(g.n, horizon, record_stride)
    recorder.record(0, x)
    selected = np.empty(horizon, dtype=np.int64)
    stopped = stop is not None and stop(OpinionState(tuple(x), 0))

    t = 0
    while t < horizon and not stopped:
        block = dist.sample_indices(rng.random(min(SAMPLE_BLOCK, horizon - t)))
        used = 0
        for k in block.tolist():
            _update_pair(x, edge_i[k], edge_j[k], signs[k], weights, o_min, o_max, slack)
            used += 1
            if (t + used) % record_stride == 0:
                recorder.record(t + used, x)
                if stop is not None and stop(OpinionState(tuple(x), t + used)):
                    stopped = True
                    break
        selected[t:t + used] = block[:used]
        t += used

    if recorder.last_time() != t:
        recorder.record(t, x)

    times, states = recorder.finish()
    edges = np.array(dist.edges, dtype=np.int64).reshape(-1, 2)
    stop_reason = 'stop_rule' if stopped else 'horizon'
    logger.debug("Trajectory finished after %d steps (%s)", t, stop_reason)
    return Trajectory(
        graph=g,
        params=params,
        times=times,
        states=states,
        edge_log=edges[selected[:t]],
        seed=seed,
        stride=record_stride,
        stop_reason=stop_reason,
    )


def replay_sequence(
    g: SignedGraph,
    params: ModelParams,
    x0: Iterable[float],
    edge_sequence: Iterable[Sequence[int]],
    record_stride: int = 1,
) -> Trajectory:
    """
    Apply the update along a prescribed edge sequence; no randomness.

    Raises:
        UnknownEdge: a listed pair is not an edge of g
    """
    if g.n != params.n:
        raise InvalidParams(f"Graph has {g.n} agents, params have {params.n}")
    if record_stride < 1:
        raise InvalidParams(f"record_stride must be >= 1, got {record_stride}")

    sequence = []
    for entry in edge_sequence:
        i, j = (int(v) for v in entry)
        if not g.has_edge(i, j):
            raise UnknownEdge(f"({i}, {j}) is not an edge of the graph")
        sequence.append((i, j, g.sign(i, j)))

    x = validate_initial_opinions(x0, params)
    weights, o_min, o_max, slack = params.self_weights, params.o_min, params.o_max, params.rounding_slack
    recorder = _Recorder(g.n, len(sequence), record_stride)
    recorder.record(0, x)
    for t, (i, j, sign) in enumerate(sequence, start=1):
        _update_pair(x, i, j, sign, weights, o_min, o_max, slack)
        if t % record_stride == 0:
            recorder.record(t, x)
    if recorder.last_time() != len(sequence):
        recorder.record(len(sequence), x)

    times, states = recorder.finish()
    edge_log = np.array([(i, j) for i, j, _ in sequence], dtype=np.int64).reshape(-1, 2)
    return Trajectory(
        graph=g,
        params=params,
        times=times,
        states=states,
        edge_log=edge_log,
        stride=record_stride,
        stop_reason='sequence_end',
    )
