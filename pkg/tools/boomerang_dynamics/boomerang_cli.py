"""
Boomerang Dynamics Command Line

Subcommands:
    simulate       one seeded trajectory -> trajectory CSV + edge log (+ analysis report)
    check-balance  k-sign arrangement / balance class of a graph file
    montecarlo     seeded trials -> JSON summary + per-trial CSV
    replay         apply an edge-sequence file deterministically -> trajectory CSV
    perturb        flip N random edge signs -> graph file
    proximity      constructive proximity sequence for a pair -> edge-sequence file

Exit codes: 0 success, 1 model-level failure or violated arrangement,
2 I/O or validation error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from boomerang_model import ModelParams, replay_sequence
from exceptions import BoomerangError, ConfigValidationError, InvalidInitialOpinion
from experiment_config import MAX_SEED, ExperimentConfig, build_config, parse_config
from monte_carlo_runner import derive_seeds, prepare_experiment, run_monte_carlo, simulate_setup
from opinion_io import (
    describe_error,
    read_edge_sequence,
    read_graph,
    read_opinion_vector,
    read_trajectory_csv,
    trajectory_states,
    write_edge_sequence,
    write_graph,
    write_json,
    write_summary,
    write_trajectory_csv,
)
from proximity_builder import build_proximity_sequence
from signed_graph import classify_arrangement, perturb_flip_edges
from trajectory_analyzer import TrajectoryAnalyzer

logger = logging.getLogger(__name__)

SEED_ENV = 'BOOMERANG_SEED'

DEFAULT_PROXIMITY_EPSILON = 0.05


def _resolve_seed(args, config: Optional[ExperimentConfig] = None) -> int:
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigValidationError(f"seed: {SEED_ENV} is not an integer", field_path='master_seed') from None
    if seed is None and config is not None:
        seed = config.master_seed
    if seed is None:
        raise ConfigValidationError(f"seed: pass --seed or set {SEED_ENV}", field_path='master_seed')
    if not 0 <= seed <= MAX_SEED:
        raise ConfigValidationError(f"seed: {seed} is not an unsigned 64-bit value", field_path='master_seed')
    return seed


def _experiment_config(args) -> ExperimentConfig:
    """Config from --config and/or --graph/--a, with command-line overrides applied."""
    if args.config:
        config = parse_config(args.config)
        if getattr(args, 'graph', None):
            fields = config.model_dump()
            fields.update(graph_file=args.graph, preset=None, faction_sizes=None)
            config = build_config(fields)
    elif getattr(args, 'graph', None):
        if args.a is None:
            raise ConfigValidationError('self_weight: pass --a or --config', field_path='self_weight')
        config = build_config({'graph_file': args.graph, 'self_weight': args.a,
                               'o_min': args.o_min, 'o_max': args.o_max})
    else:
        raise ConfigValidationError('graph: pass --config or --graph', field_path='graph_file')

    return config.override(
        horizon=getattr(args, 'horizon', None),
        trials=getattr(args, 'trials', None),
        tol=getattr(args, 'tol', None),
        epsilon=getattr(args, 'epsilon', None),
        record_stride=getattr(args, 'stride', None),
        workers=getattr(args, 'workers', None),
    )


def _model_params(args, n: int) -> ModelParams:
    """Bounds and self-weights from --config, or from --a / --o-min / --o-max."""
    if args.config:
        config = parse_config(args.config)
        if config.self_weights is not None:
            return ModelParams(o_min=config.o_min, o_max=config.o_max, self_weights=tuple(config.self_weights))
        return ModelParams.uniform(n, config.self_weight, config.o_min, config.o_max)
    if args.a is None:
        raise ConfigValidationError('self_weight: pass --a or --config', field_path='self_weight')
    return ModelParams.uniform(n, args.a, args.o_min, args.o_max)


def cmd_simulate(args) -> int:
    config = _experiment_config(args)
    seed = _resolve_seed(args, config)
    config = config.override(master_seed=seed)
    setup = prepare_experiment(config)

    _, (trial_seed,) = derive_seeds(seed, 1)
    traj = simulate_setup(setup, trial_seed, stop_early=False)

    write_trajectory_csv(traj, args.out)
    edges_out = args.edges_out or f"{args.out}.edges"
    write_edge_sequence(traj.edge_sequence(), edges_out)
    print(f"Simulated {traj.steps} steps on n={setup.n} ({setup.report.summary_line()})")
    print(f"Trajectory: {args.out} ({traj.record_count} rows)")
    print(f"Edge log:   {edges_out}")
    if args.graph_out:
        write_graph(setup.graph, args.graph_out)
        print(f"Graph:      {args.graph_out}")

    if args.report:
        partition = setup.partition if setup.regime != 'unbalanced' else None
        report = TrajectoryAnalyzer(
            traj, partition, tol=config.tol, epsilon=config.epsilon, consensus_tol=config.consensus_tol
        ).analyze()
        write_json(report.to_dict(), args.report)
        print(f"Report:     {args.report} (verdict {report.verdict})")
    return 0


def cmd_check_balance(args) -> int:
    report = classify_arrangement(read_graph(args.graph))
    print(report.summary_line())
    print(f"Factions: {' | '.join(' '.join(str(v) for v in block) for block in report.partition.blocks)}")
    if report.satisfies_arrangement:
        return 0
    for reason in report.reasons():
        print(f"  - {reason}")
    return 1


def cmd_montecarlo(args) -> int:
    config = _experiment_config(args)
    config = config.override(master_seed=_resolve_seed(args, config))
    summary = run_monte_carlo(config)

    csv_out = args.csv_out or str(Path(args.out).with_suffix('.csv'))
    write_summary(summary, args.out, csv_out)
    print(f"Regime: {summary.regime}, trials: {summary.trial_count}")
    print(f"Polarized: {summary.polarized_count}/{summary.trial_count}  "
          f"Converged: {summary.converged_count}/{summary.trial_count}")
    if summary.median_hit_time is not None:
        print(f"Median hit time: {summary.median_hit_time:g}")
    if summary.clustering_pattern_frequency is not None:
        print(f"Two polarized factions + fluctuating remainder: {summary.clustering_pattern_frequency:.2%}")
    if summary.flipped_edges:
        print(f"Flipped edges: {[list(e) for e in summary.flipped_edges]}")
    print(f"Summary: {args.out}")
    print(f"Per-trial table: {csv_out}")
    return 0


def _replay_initial_state(args) -> List[float]:
    if args.trajectory and args.initial:
        raise InvalidInitialOpinion('pass only one of --trajectory and --initial')
    if args.trajectory:
        _, states = trajectory_states(read_trajectory_csv(args.trajectory))
        return states[0].tolist()
    if args.initial:
        return read_opinion_vector(args.initial)
    raise InvalidInitialOpinion('pass --trajectory or --initial for the initial state')


def cmd_replay(args) -> int:
    g = read_graph(args.graph)
    params = _model_params(args, g.n)
    traj = replay_sequence(g, params, _replay_initial_state(args), read_edge_sequence(args.edges),
                           record_stride=args.stride or 1)
    write_trajectory_csv(traj, args.out)
    final = np.array(traj.final_state.x)
    print(f"Replayed {traj.steps} edges; final spread {final.max() - final.min():.6g}")
    print(f"Trajectory: {args.out}")
    return 0


def cmd_perturb(args) -> int:
    g = read_graph(args.graph)
    perturbation_seed, _ = derive_seeds(_resolve_seed(args), 0)
    perturbed, flipped = perturb_flip_edges(g, args.flip, np.random.default_rng(perturbation_seed))
    write_graph(perturbed, args.out)
    print(f"Flipped {len(flipped)} edges: {' '.join(f'({i},{j})' for i, j in flipped)}")
    print(f"Before: {classify_arrangement(g).summary_line()}")
    print(f"After:  {classify_arrangement(perturbed).summary_line()}")
    print(f"Graph: {args.out}")
    return 0


def cmd_proximity(args) -> int:
    g = read_graph(args.graph)
    params = _model_params(args, g.n)
    report = classify_arrangement(g)
    i, j = args.pair
    epsilon = args.epsilon if args.epsilon is not None else DEFAULT_PROXIMITY_EPSILON
    sequence = build_proximity_sequence(g, report.partition, params, i, j, epsilon)
    write_edge_sequence(sequence, args.out)
    same = report.partition.faction_of(i) == report.partition.faction_of(j)
    goal = 'closeness' if same else 'separation'
    print(f"{goal.capitalize()} sequence for ({i}, {j}), epsilon={epsilon:g}: {len(sequence)} edges")
    print(f"Sequence: {args.out}")
    return 0


def _add_params_flags(parser):
    parser.add_argument('--a', type=float, help='Uniform self-weight in (0, 1)')
    parser.add_argument('--o-min', type=float, default=0.0, help='Lower opinion bound')
    parser.add_argument('--o-max', type=float, default=1.0, help='Upper opinion bound')


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='Debug logging on stderr')

    parser = argparse.ArgumentParser(
        prog='boomerang_cli',
        description='Affine boomerang opinion dynamics on signed graphs',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', parents=[common], help='Simulate one seeded trajectory')
    simulate.add_argument('--config', help='Experiment config JSON')
    simulate.add_argument('--graph', help='Graph file (overrides the config graph)')
    _add_params_flags(simulate)
    simulate.add_argument('--seed', type=int, help=f'u64 seed (falls back to ${SEED_ENV})')
    simulate.add_argument('--horizon', type=int)
    simulate.add_argument('--stride', type=int, help='Record every N steps')
    simulate.add_argument('--tol', type=float)
    simulate.add_argument('--epsilon', type=float)
    simulate.add_argument('--out', required=True, help='Trajectory CSV')
    simulate.add_argument('--edges-out', help='Edge log file (default <out>.edges)')
    simulate.add_argument('--graph-out', help='Write the simulated graph, after any perturbation')
    simulate.add_argument('--report', help='Analysis report JSON')
    simulate.set_defaults(handler=cmd_simulate)

    check = commands.add_parser('check-balance', parents=[common], help='Classify a graph file')
    check.add_argument('--graph', required=True)
    check.set_defaults(handler=cmd_check_balance)

    montecarlo = commands.add_parser('montecarlo', parents=[common], help='Run seeded trials')
    montecarlo.add_argument('--config', help='Experiment config JSON')
    montecarlo.add_argument('--graph', help='Graph file (overrides the config graph)')
    _add_params_flags(montecarlo)
    montecarlo.add_argument('--seed', type=int, help=f'u64 master seed (falls back to ${SEED_ENV})')
    montecarlo.add_argument('--horizon', type=int)
    montecarlo.add_argument('--trials', type=int)
    montecarlo.add_argument('--tol', type=float)
    montecarlo.add_argument('--epsilon', type=float)
    montecarlo.add_argument('--workers', type=int)
    montecarlo.add_argument('--out', required=True, help='Summary JSON')
    montecarlo.add_argument('--csv-out', help='Per-trial CSV (default <out> with .csv suffix)')
    montecarlo.set_defaults(handler=cmd_montecarlo)

    replay = commands.add_parser('replay', parents=[common], help='Replay an edge sequence')
    replay.add_argument('--graph', required=True)
    replay.add_argument('--edges', required=True, help='Edge-sequence file')
    replay.add_argument('--trajectory', help='Take x(0) from a trajectory CSV')
    replay.add_argument('--initial', help='Take x(0) from an opinion-vector file')
    replay.add_argument('--config', help='Take bounds and self-weights from a config')
    _add_params_flags(replay)
    replay.add_argument('--stride', type=int)
    replay.add_argument('--out', required=True, help='Trajectory CSV')
    replay.set_defaults(handler=cmd_replay)

    perturb = commands.add_parser('perturb', parents=[common], help='Flip random edge signs')
    perturb.add_argument('--graph', required=True)
    perturb.add_argument('--flip', type=int, required=True, help='Number of edges to flip')
    perturb.add_argument('--seed', type=int, help=f'u64 seed (falls back to ${SEED_ENV})')
    perturb.add_argument('--out', required=True, help='Perturbed graph file')
    perturb.set_defaults(handler=cmd_perturb)

    proximity = commands.add_parser('proximity', parents=[common], help='Build a proximity sequence')
    proximity.add_argument('--graph', required=True)
    proximity.add_argument('--pair', type=int, nargs=2, required=True, metavar=('I', 'J'))
    proximity.add_argument('--epsilon', type=float, help=f'Target (default {DEFAULT_PROXIMITY_EPSILON})')
    proximity.add_argument('--config', help='Take bounds and self-weights from a config')
    _add_params_flags(proximity)
    proximity.add_argument('--out', required=True, help='Edge-sequence file')
    proximity.set_defaults(handler=cmd_proximity)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return int(stop.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(asctime)s %(name)s %(levelname)s %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except BoomerangError as error:
        print(describe_error(error), file=sys.stderr)
        return error.exit_code
    except OSError as error:
        print(f"I/O error: {error}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
