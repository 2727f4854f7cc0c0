"""
Finite-Time Proximity Sequences

Builds a finite edge sequence that, replayed on a graph with the 2-sign
arrangement, brings two agents of the same faction within epsilon of each
other, or drives two agents of different factions to within epsilon of
opposite bounds.

Repetition counts come from worst-case certificates rather than from trial
replays:

- Positive updates are linear in x. The composed map is tracked as a
  row-stochastic matrix P (x = P x0), and the largest gap |x_r - x_s| over
  all x0 in the box is span * sum(max(P_r - P_s, 0)).
- Once the two factions are strictly separated, the distance of every agent
  to its faction's bound evolves linearly and monotonically, so the worst
  case starts from every distance equal to the span.
- Separation itself comes from a split step: a push on the linking negative
  edge, a pull of one endpoint back toward a faction-mate (which also
  breaks a tied push), more pushes, and a second faction contraction. The
  repetition counts are sized from the contraction weights of the pushed
  agents, so the contracted factions land strictly apart. The one start it
  cannot split is a tie sitting exactly on the pushed value, such as every
  opinion at o_max, which no edge update ever moves.
"""

import logging
from typing import Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np

from boomerang_model import ModelParams
from exceptions import (
    ArrangementViolated,
    IndexOutOfRange,
    InvalidEpsilon,
    InvalidParams,
    NoPath,
    ProximityLimitExceeded,
)
from signed_graph import Edge, FactionPartition, SignedGraph, classify_arrangement

logger = logging.getLogger(__name__)

MAX_SEQUENCE_EDGES = 10 ** 6

# Certified bounds must beat epsilon by this factor to absorb floating-point replay error.
CERTIFICATE_MARGIN = 0.5

# Within-faction spread (relative to the span) reached before the cross-faction push.
SEPARATION_SPREAD = 1e-9


def _positive_path(positive: nx.Graph, source: int, target: int) -> List[int]:
    try:
        return nx.shortest_path(positive, source, target)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise NoPath(f"No all-positive path between {source} and {target}") from None


def _mix_rows(P: np.ndarray, r: int, s: int, a_r: float, a_s: float):
    row_r, row_s = P[r].copy(), P[s]
    P[r] = a_r * row_r + (1.0 - a_r) * row_s
    P[s] = a_s * row_s + (1.0 - a_s) * row_r


def _worst_gap(P: np.ndarray, r: int, s: int) -> float:
    return float(np.clip(P[r] - P[s], 0.0, None).sum())


def _worst_spread(P: np.ndarray) -> float:
    if len(P) < 2:
        return 0.0
    return float(np.clip(P[:, None, :] - P[None, :, :], 0.0, None).sum(axis=2).max())


def _check_length(sequence: List[Edge]):
    if len(sequence) > MAX_SEQUENCE_EDGES:
        raise ProximityLimitExceeded(
            f"Proximity sequence exceeded {MAX_SEQUENCE_EDGES} edges; self-weights too close to 1?"
        )


def _contract_path(path: Sequence[int], params: ModelParams, target: float) -> List[Edge]:
    """Sweep the path from its far end until the endpoints' worst-case gap is below target."""
    if len(path) < 2:
        return []
    index = {v: r for r, v in enumerate(path)}
    sweep = [(path[r - 1], path[r]) for r in range(len(path) - 1, 0, -1)]
    weights = params.self_weights
    P = np.eye(len(path))
    sequence: List[Edge] = []
    while params.span * _worst_gap(P, 0, len(path) - 1) >= target:
        for u, v in sweep:
            _mix_rows(P, index[u], index[v], weights[u], weights[v])
        sequence.extend(sweep)
        _check_length(sequence)
    return sequence


def _faction_consensus(positive: nx.Graph, block: Sequence[int], params: ModelParams,
                       target: float) -> Tuple[List[Edge], np.ndarray]:
    """
    Sweep a BFS tree of the faction until its worst-case spread is below target.

    Also returns the composed map P, rows and columns in block order.
    """
    if len(block) < 2:
        return [], np.eye(len(block))
    tree = list(nx.bfs_edges(positive, block[0]))
    index = {v: r for r, v in enumerate(block)}
    weights = params.self_weights
    P = np.eye(len(block))
    sequence: List[Edge] = []
    while params.span * _worst_spread(P) >= target:
        for u, v in tree:
            _mix_rows(P, index[u], index[v], weights[u], weights[v])
        sequence.extend(tree)
        _check_length(sequence)
    return sequence, P


def _choose_negative_edge(g: SignedGraph, positive: nx.Graph, labels: List[int], i: int, j: int) -> Edge:
    """Negative edge (u, v), u in i's faction, minimising the positive hops i->u plus v->j."""
    from_i = nx.single_source_shortest_path_length(positive, i)
    from_j = nx.single_source_shortest_path_length(positive, j)
    candidates = []
    for p, q in g.negative_edges:
        u, v = (p, q) if labels[p] == labels[i] else (q, p)
        if labels[u] != labels[i] or labels[v] != labels[j]:
            continue
        if u in from_i and v in from_j:
            candidates.append((from_i[u] + from_j[v], u, v))
    if not candidates:
        raise NoPath(f"No negative edge joins the factions of {i} and {j}")
    _, u, v = min(candidates)
    return u, v


def _repetitions(weight: float, target: float) -> int:
    """Smallest m >= 1 with weight ** m <= target."""
    return max(1, int(np.ceil(np.log(target) / np.log(weight))))


def _contraction_share(block: Sequence[int], P: np.ndarray, agents: Sequence[int]) -> float:
    """Least total weight any contracted row of the faction puts on the given agents."""
    columns = [block.index(agent) for agent in agents]
    return float(P[:, columns].sum(axis=1).min())


def _split_factions(positive: nx.Graph, labels: List[int],
                    plans: List[Tuple[Sequence[int], np.ndarray]],
                    u: int, v: int, params: ModelParams) -> List[Edge]:
    """
    Edges that leave the factions strictly apart once both are contracted again.

    After one push on (u, v) one endpoint is pulled back toward a faction-mate.
    A tied push sends both endpoints toward o_max, so the pull leaves them
    strictly ordered unless the mate already sits on the pushed value. Runs
    of pushes then drive the endpoints to opposite bounds, each run followed
    by another pull that drags the mate along with its endpoint.
    """
    anchor, other = (u, v) if positive.degree(u) > 0 else (v, u)
    if positive.degree(anchor) == 0:
        return []
    mate = min(positive.neighbors(anchor))
    weights = params.self_weights
    anchor_block, anchor_map = plans[labels[anchor]]
    other_block, other_map = plans[labels[other]]
    share = min(
        _contraction_share(anchor_block, anchor_map, (anchor, mate)),
        _contraction_share(other_block, other_map, (other,)),
    )
    # contracted factions sit at least (5/8) * share * span apart, less the contraction spread
    slack = 16.0 * SEPARATION_SPREAD / (1.0 - max(weights[u], weights[v]))
    if share <= slack:
        raise ProximityLimitExceeded(
            f"Agents {u} and {v} carry too little weight in their factions' consensus ({share:.3g})"
        )

    run = [(u, v)] * _repetitions(max(weights[u], weights[v]), share / 8.0)
    sequence: List[Edge] = [(u, v), (anchor, mate)] + run
    for _ in range(_repetitions(weights[mate], share / 8.0)):
        sequence += [(anchor, mate)] + run
        _check_length(sequence)
    return sequence


def _polarize_pair(path_i: Sequence[int], path_j: Sequence[int], params: ModelParams,
                   target: float) -> List[Edge]:
    """Rounds of one push on the negative edge followed by sweeps back toward i and j."""
    u, v = path_i[-1], path_j[-1]
    round_edges: List[Edge] = [(u, v)]
    round_edges += [(path_i[r - 1], path_i[r]) for r in range(len(path_i) - 1, 0, -1)]
    round_edges += [(path_j[r - 1], path_j[r]) for r in range(len(path_j) - 1, 0, -1)]

    weights = params.self_weights
    distance: Dict[int, float] = {w: params.span for w in list(path_i) + list(path_j)}
    i, j = path_i[0], path_j[0]
    sequence: List[Edge] = []
    while distance[i] + distance[j] >= target:
        for p, q in round_edges:
            if (p, q) == (u, v):
                distance[u] *= weights[u]
                distance[v] *= weights[v]
            else:
                dp, dq = distance[p], distance[q]
                distance[p] = weights[p] * dp + (1.0 - weights[p]) * dq
                distance[q] = weights[q] * dq + (1.0 - weights[q]) * dp
        sequence.extend(round_edges)
        _check_length(sequence)
    return sequence


def build_proximity_sequence(
    g: SignedGraph,
    partition: FactionPartition,
    params: ModelParams,
    i: int,
    j: int,
    epsilon: float,
) -> List[Edge]:
    """
    Finite edge sequence bringing i and j close (same faction) or far apart (different factions).

    Args:
        g: Graph satisfying the 2-sign arrangement
        partition: Its two factions
        params: Bounds and self-weights
        i, j: Agents
        epsilon: Closeness target; the separation target is span - epsilon

    Returns:
        List of edges to replay in order

    Raises:
        ArrangementViolated: g does not satisfy the 2-sign arrangement
        NoPath: no positive path or linking negative edge exists
    """
    if not epsilon > 0:
        raise InvalidEpsilon(f"epsilon must be > 0, got {epsilon}")
    report = classify_arrangement(g)
    if not report.satisfies_arrangement or report.k != 2 or partition.k != 2:
        raise ArrangementViolated(
            f"Proximity sequences need the 2-sign arrangement; graph has k={report.k}, "
            f"arrangement {'holds' if report.satisfies_arrangement else 'violated'}"
        )
    if params.n != g.n:
        raise InvalidParams(f"Params describe {params.n} agents, graph has {g.n}")
    if partition.blocks != report.partition.blocks:
        raise ArrangementViolated("Partition does not match the positive components of the graph")
    for agent in (i, j):
        if not 0 <= agent < g.n:
            raise IndexOutOfRange(f"Agent {agent} is outside [0, {g.n})")
    if i == j:
        return []

    positive = g.to_networkx(positive_only=True)
    labels = partition.membership()
    target = CERTIFICATE_MARGIN * epsilon

    if labels[i] == labels[j]:
        sequence = _contract_path(_positive_path(positive, i, j), params, target)
    else:
        u, v = _choose_negative_edge(g, positive, labels, i, j)
        path_i = _positive_path(positive, i, u)
        path_j = _positive_path(positive, j, v)
        consensus: List[Edge] = []
        plans = []
        for block in partition.blocks:
            sweeps, P = _faction_consensus(positive, block, params, SEPARATION_SPREAD * params.span)
            consensus += sweeps
            plans.append((block, P))
        sequence = consensus + _split_factions(positive, labels, plans, u, v, params) + consensus
        sequence += _polarize_pair(path_i, path_j, params, target)
        _check_length(sequence)

    logger.info("Proximity sequence for (%d, %d): %d edges", i, j, len(sequence))
    return sequence
