"""
Signed Graph Core

Signed-graph representation, faction (positive component) detection, the
k-sign arrangement / balance classifier, experiment topology generators and
sign-flip perturbation.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np

from exceptions import (
    CountExceedsEdges,
    DuplicateEdge,
    IndexOutOfRange,
    InvalidSign,
    InvalidSizes,
    SelfLoop,
    UnknownEdge,
)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
SignedEdge = Tuple[int, int, int]

BALANCE_CLASSES = ('structural_m1', 'structural_m2', 'clustering', 'none')

_BALANCE_LABELS = {
    'structural_m1': 'structural balance',
    'structural_m2': 'structural balance',
    'clustering': 'clustering balance',
    'none': 'no balance class',
}


def normalize_edge(i: int, j: int) -> Edge:
    """Return the unordered pair {i, j} as an ascending tuple."""
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SignedGraph:
    """
    Undirected simple graph whose edges carry +1 or -1.

    Build instances with build_signed_graph(); `edges` is kept sorted by
    (i, j) with i < j, so two graphs with the same signed edge set compare equal.
    """

    n: int
    edges: Tuple[SignedEdge, ...]
    _signs: Dict[Edge, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, '_signs', {(i, j): s for i, j, s in self.edges})

    @property
    def pairs(self) -> Tuple[Edge, ...]:
        return tuple((i, j) for i, j, _ in self.edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def positive_edges(self) -> Tuple[Edge, ...]:
        return tuple((i, j) for i, j, s in self.edges if s > 0)

    @property
    def negative_edges(self) -> Tuple[Edge, ...]:
        return tuple((i, j) for i, j, s in self.edges if s < 0)

    def has_edge(self, i: int, j: int) -> bool:
        return normalize_edge(i, j) in self._signs

    def sign(self, i: int, j: int) -> int:
        """Sign of edge {i, j}."""
        try:
            return self._signs[normalize_edge(i, j)]
        except KeyError:
            raise UnknownEdge(f"Edge ({i}, {j}) is not in the graph") from None

    def is_complete(self) -> bool:
        return self.edge_count == self.n * (self.n - 1) // 2

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def to_networkx(self, positive_only: bool = False) -> nx.Graph:
        """NetworkX view with a 'sign' edge attribute; node and edge order are ascending."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for i, j, s in self.edges:
            if positive_only and s < 0:
                continue
            graph.add_edge(i, j, sign=s)
        return graph


@dataclass(frozen=True)
class FactionPartition:
    """Vertices grouped into factions, ordered by smallest member."""

    blocks: Tuple[Tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def faction_of(self, vertex: int) -> int:
        for index, block in enumerate(self.blocks):
            if vertex in block:
                return index
        raise IndexOutOfRange(f"Vertex {vertex} is in no faction")

    def membership(self) -> List[int]:
        """Faction index of every vertex."""
        labels = [0] * self.n
        for index, block in enumerate(self.blocks):
            for vertex in block:
                labels[vertex] = index
        return labels

    def to_dict(self):
        return {'k': self.k, 'blocks': [list(b) for b in self.blocks]}


@dataclass(frozen=True)
class ArrangementReport:
    """Outcome of classify_arrangement()."""

    n: int
    connected: bool
    complete: bool
    k: int
    satisfies_arrangement: bool
    violating_edges: Tuple[Edge, ...]
    balance_class: str
    partition: FactionPartition

    def summary_line(self) -> str:
        if self.satisfies_arrangement:
            return f"k={self.k} {_BALANCE_LABELS[self.balance_class]}" if self.complete \
                else f"k={self.k} sign arrangement (incomplete graph, no balance class)"
        return f"k={self.k} sign arrangement violated"

    def reasons(self) -> List[str]:
        """Why the graph falls outside the arrangement property, if it does."""
        reasons = []
        if self.n < 3:
            reasons.append(f"graph has n={self.n} < 3 vertices")
        if not self.connected:
            reasons.append('graph is not connected')
        for i, j in self.violating_edges:
            reasons.append(f"negative edge {i} {j} lies inside a faction")
        return reasons

    def to_dict(self):
        return {
            'n': self.n,
            'connected': self.connected,
            'complete': self.complete,
            'k': self.k,
            'satisfies_arrangement': self.satisfies_arrangement,
            'violating_edges': [list(e) for e in self.violating_edges],
            'balance_class': self.balance_class,
            'factions': [list(b) for b in self.partition.blocks],
        }


def build_signed_graph(n: int, signed_edges: Iterable[Sequence[int]]) -> SignedGraph:
    """
    Validate and build a signed graph.

    Args:
        n: Vertex count (>= 1)
        signed_edges: Iterable of (i, j, sign) with sign in {+1, -1}

    Returns:
        SignedGraph
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise IndexOutOfRange(f"Vertex count must be an integer >= 1, got {n!r}")
    n = int(n)

    signs: Dict[Edge, int] = {}
    for entry in signed_edges:
        i, j, s = (int(v) for v in entry)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"Edge ({i}, {j}) has an endpoint outside [0, {n})")
        if i == j:
            raise SelfLoop(f"Self-loop at vertex {i}")
        if s not in (1, -1):
            raise InvalidSign(f"Edge ({i}, {j}) has sign {s}; expected +1 or -1")
        pair = normalize_edge(i, j)
        if pair in signs:
            raise DuplicateEdge(f"Edge {pair} listed more than once")
        signs[pair] = s

    edges = tuple((i, j, signs[(i, j)]) for i, j in sorted(signs))
    return SignedGraph(n=n, edges=edges)


def positive_components(g: SignedGraph) -> FactionPartition:
    """Connected components of the positive subgraph, ordered by smallest vertex."""
    components = nx.connected_components(g.to_networkx(positive_only=True))
    blocks = sorted((tuple(sorted(c)) for c in components), key=lambda b: b[0])
    return FactionPartition(blocks=tuple(blocks))


def classify_arrangement(g: SignedGraph) -> ArrangementReport:
    """
    Check the k-sign arrangement property and, for complete graphs, the balance class.

    Degenerate inputs (n < 3, disconnected, internal negative edges) are
    reported, not raised.
    """
    partition = positive_components(g)
    labels = partition.membership()
    violating = tuple((i, j) for i, j in g.negative_edges if labels[i] == labels[j])
    connected = g.is_connected()
    complete = g.is_complete()
    satisfies = connected and g.n >= 3 and not violating

    balance_class = 'none'
    if satisfies and complete:
        if partition.k == 1:
            balance_class = 'structural_m1'
        elif partition.k == 2:
            balance_class = 'structural_m2'
        else:
            balance_class = 'clustering'

    return ArrangementReport(
        n=g.n,
        connected=connected,
        complete=complete,
        k=partition.k,
        satisfies_arrangement=satisfies,
        violating_edges=violating,
        balance_class=balance_class,
        partition=partition,
    )


def _validate_sizes(faction_sizes: Sequence[int]) -> List[int]:
    sizes = list(faction_sizes)
    if not sizes:
        raise InvalidSizes("faction_sizes must be nonempty")
    for size in sizes:
        if isinstance(size, bool) or not isinstance(size, (int, np.integer)) or size < 1:
            raise InvalidSizes(f"Faction sizes must be positive integers, got {size!r}")
    if len(sizes) > 1 and sum(sizes) < 3:
        raise InvalidSizes("Graphs with more than one faction need at least 3 vertices")
    return [int(s) for s in sizes]


def _consecutive_blocks(sizes: Sequence[int]) -> List[List[int]]:
    blocks, start = [], 0
    for size in sizes:
        blocks.append(list(range(start, start + size)))
        start += size
    return blocks


def generate_complete_clustered(faction_sizes: Sequence[int]) -> Tuple[SignedGraph, FactionPartition]:
    """
    Complete graph with +1 inside factions and -1 across them.

    Args:
        faction_sizes: Sizes of consecutive vertex blocks, e.g. [5, 7]

    Returns:
        (SignedGraph, FactionPartition)
    """
    sizes = _validate_sizes(faction_sizes)
    labels = []
    for index, size in enumerate(sizes):
        labels.extend([index] * size)

    n = len(labels)
    edges = [(i, j, 1 if labels[i] == labels[j] else -1) for i, j in combinations(range(n), 2)]
    g = build_signed_graph(n, edges)
    return g, positive_components(g)


def random_arrangement_graph(
    faction_sizes: Sequence[int],
    rng: np.random.Generator,
    positive_density: float = 0.3,
    negative_density: float = 0.3,
    all_pairs: bool = False,
) -> Tuple[SignedGraph, FactionPartition]:
    """
    Random connected graph satisfying the k-sign arrangement; usually incomplete.

    Each faction gets a random positive spanning tree plus extra positive edges
    with probability `positive_density`; cross-faction pairs become negative
    edges with probability `negative_density`. At least one negative edge joins
    consecutive factions (every pair of factions when `all_pairs`).
    """
    sizes = _validate_sizes(faction_sizes)
    if sum(sizes) < 3:
        raise InvalidSizes("Arrangement graphs need at least 3 vertices")

    blocks = _consecutive_blocks(sizes)
    edges: Dict[Edge, int] = {}

    for block in blocks:
        order = [int(v) for v in rng.permutation(block)]
        for position in range(1, len(order)):
            parent = order[int(rng.integers(0, position))]
            edges[normalize_edge(order[position], parent)] = 1
        for i, j in combinations(block, 2):
            if (i, j) not in edges and rng.random() < positive_density:
                edges[(i, j)] = 1

    for a, b in combinations(range(len(blocks)), 2):
        linked = False
        for i in blocks[a]:
            for j in blocks[b]:
                if rng.random() < negative_density:
                    edges[(i, j)] = -1
                    linked = True
        if not linked and (all_pairs or b == a + 1):
            i = blocks[a][int(rng.integers(0, len(blocks[a])))]
            j = blocks[b][int(rng.integers(0, len(blocks[b])))]
            edges[(i, j)] = -1

    g = build_signed_graph(sum(sizes), [(i, j, s) for (i, j), s in edges.items()])
    return g, positive_components(g)


def flip_edge_signs(g: SignedGraph, pairs: Iterable[Sequence[int]]) -> SignedGraph:
    """Copy of `g` with the named edges' signs negated."""
    targets = set()
    for pair in pairs:
        i, j = (int(v) for v in pair)
        if not g.has_edge(i, j):
            raise UnknownEdge(f"Cannot flip ({i}, {j}): not an edge")
        targets.add(normalize_edge(i, j))
    return build_signed_graph(g.n, [(i, j, -s if (i, j) in targets else s) for i, j, s in g.edges])


def perturb_flip_edges(
    g: SignedGraph, count: int, rng: np.random.Generator
) -> Tuple[SignedGraph, List[Edge]]:
    """
    Negate the signs of `count` distinct, uniformly chosen edges.

    Returns:
        (perturbed copy, sorted list of flipped edges); `g` is untouched
    """
    if count < 0 or count > g.edge_count:
        raise CountExceedsEdges(f"Cannot flip {count} of {g.edge_count} edges")
    chosen = rng.choice(g.edge_count, size=count, replace=False) if count else []
    flipped = sorted(g.pairs[int(index)] for index in chosen)
    logger.debug("Flipping %d edges: %s", count, flipped)
    return flip_edge_signs(g, flipped), flipped

