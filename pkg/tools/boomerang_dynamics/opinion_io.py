"""
Opinion I/O

Readers and writers for the tool's file formats:

- graph files: `n <count>` then one `<i> <j> <+1|-1>` line per edge, `#` comments
- edge-sequence files: one `<i> <j>` pair per line
- opinion-vector files: whitespace-separated values
- trajectory CSV: `t,edge_i,edge_j,x_0,...,x_{n-1}`, 17 significant digits
- JSON reports and summaries, plus the one-row-per-trial summary CSV
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from boomerang_model import Trajectory
from exceptions import BoomerangError, GraphFormatError
from signed_graph import Edge, SignedGraph, build_signed_graph

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = '%.17g'

TRAJECTORY_COLUMNS = ('t', 'edge_i', 'edge_j')


def _content_lines(text: str) -> Iterator[Tuple[int, List[str]]]:
    """(line number, tokens) of every non-blank line with comments removed."""
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if tokens:
            yield number, tokens


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError as error:
        raise GraphFormatError(f"{path}: not UTF-8 text ({error.reason} at byte {error.start})") from None


def _int_token(token: str, path: PathLike, number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"{path}:{number}: expected an integer, got '{token}'") from None


def parse_graph(text: str, source: PathLike = '<graph>') -> SignedGraph:
    """
    Parse graph-file text.

    Raises:
        GraphFormatError: malformed header or edge line
        IndexOutOfRange, SelfLoop, InvalidSign, DuplicateEdge: invalid edges
    """
    lines = _content_lines(text)
    header = next(lines, None)
    if header is None:
        raise GraphFormatError(f"{source}: empty graph file")
    number, tokens = header
    if len(tokens) != 2 or tokens[0] != 'n':
        raise GraphFormatError(f"{source}:{number}: first line must be 'n <count>'")
    n = _int_token(tokens[1], source, number)

    edges = []
    for number, tokens in lines:
        if len(tokens) != 3:
            raise GraphFormatError(f"{source}:{number}: expected '<i> <j> <+1|-1>'")
        edges.append(tuple(_int_token(token, source, number) for token in tokens))
    return build_signed_graph(n, edges)


def format_graph(g: SignedGraph) -> str:
    lines = [f"n {g.n}"]
    lines += [f"{i} {j} {'+1' if s > 0 else '-1'}" for i, j, s in g.edges]
    return '\n'.join(lines) + '\n'


def read_graph(path: PathLike) -> SignedGraph:
    g = parse_graph(_read_text(path), source=path)
    logger.debug("Read graph %s: n=%d, m=%d", path, g.n, g.edge_count)
    return g


def write_graph(g: SignedGraph, path: PathLike):
    Path(path).write_text(format_graph(g), encoding='utf-8')


def read_edge_sequence(path: PathLike) -> List[Edge]:
    sequence = []
    for number, tokens in _content_lines(_read_text(path)):
        if len(tokens) != 2:
            raise GraphFormatError(f"{path}:{number}: expected '<i> <j>'")
        sequence.append((_int_token(tokens[0], path, number), _int_token(tokens[1], path, number)))
    return sequence


def write_edge_sequence(sequence: Sequence[Sequence[int]], path: PathLike):
    Path(path).write_text(''.join(f"{int(i)} {int(j)}\n" for i, j in sequence), encoding='utf-8')


def read_opinion_vector(path: PathLike) -> List[float]:
    values = []
    for number, tokens in _content_lines(_read_text(path)):
        for token in tokens:
            try:
                values.append(float(token))
            except ValueError:
                raise GraphFormatError(f"{path}:{number}: expected a number, got '{token}'") from None
    if not values:
        raise GraphFormatError(f"{path}: no opinion values")
    return values


def write_opinion_vector(values: Sequence[float], path: PathLike):
    Path(path).write_text(''.join(FLOAT_FORMAT % float(v) + '\n' for v in values), encoding='utf-8')


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """
    One row per recorded state.

    edge_i / edge_j name the edge applied at step t; the initial row uses -1.
    """
    times = np.asarray(traj.times, dtype=np.int64)
    edges = np.full((len(times), 2), -1, dtype=np.int64)
    moved = times > 0
    edges[moved] = traj.edge_log[times[moved] - 1]

    frame = pd.DataFrame({'t': times, 'edge_i': edges[:, 0], 'edge_j': edges[:, 1]})
    opinions = pd.DataFrame(traj.states, columns=[f"x_{i}" for i in range(traj.states.shape[1])])
    return pd.concat([frame, opinions], axis=1)


def write_trajectory_csv(traj: Trajectory, path: PathLike):
    trajectory_frame(traj).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug("Wrote %d trajectory rows to %s", traj.record_count, path)


def read_trajectory_csv(path: PathLike) -> pd.DataFrame:
    """
    Load a trajectory CSV written by write_trajectory_csv.

    Raises:
        GraphFormatError: header does not match the trajectory layout
    """
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise GraphFormatError(f"{path}: unreadable trajectory CSV ({error})") from None
    columns = list(frame.columns)
    n = len(columns) - len(TRAJECTORY_COLUMNS)
    expected = list(TRAJECTORY_COLUMNS) + [f"x_{i}" for i in range(n)]
    if n < 1 or columns != expected or frame.empty:
        raise GraphFormatError(f"{path}: expected header {','.join(expected)}")
    return frame


def trajectory_states(frame: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    """(times, states) arrays from a trajectory frame."""
    opinions = [c for c in frame.columns if c.startswith('x_')]
    return frame['t'].to_numpy(dtype=np.int64), frame[opinions].to_numpy(dtype=float)


def _json_text(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2) + '\n'


def write_json(payload: Dict[str, Any], path: PathLike):
    Path(path).write_text(_json_text(payload), encoding='utf-8')


def write_summary(summary, json_path: PathLike, csv_path: PathLike):
    """Write an ExperimentSummary as JSON plus the per-trial CSV."""
    write_json(summary.to_dict(), json_path)
    summary.trials_frame().to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote summary %s and per-trial table %s", json_path, csv_path)


def describe_error(error: BoomerangError) -> str:
    """Single-line message for the CLI's stderr."""
    return f"{type(error).__name__}: {error}"
