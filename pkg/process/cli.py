"""
Command-line entry point:

    barropt [--threads N] [--tol T] [--quiet|--verbose] [--config config.yaml] <command> ...

Commands: scale, one-barrier, solve, verify, simulate, sweep, batch.
Exit codes: 0 success, 1 failed HJB verification, 2 input error,
3 convergence failure.
"""

import argparse
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from barropt_logging.logger_config import logger, set_verbosity
from levy.levy_model import LevyModel
from levy.reward import RewardFunction
from levy.scale_functions import ScaleFunctions, scale_table
from solve.barrier_set import BarrierSet, ValueFunction
from solve.one_barrier import SearchOptions, find_bstar
from solve.multibarrier import solve, sweep
from verify.hjb import HjbGridSpec, check_hjb
from verify.monte_carlo import SimConfig, simulate_value, simulate_paths
from utils.config_utils import load_config, build_options, section
from utils.errors import BarroptError, ConfigError
from utils.output import make_header, write_json, write_csv


logger = logging.getLogger('process.cli')

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT = 2


def parse_range(text, counted=False):
    """'start:stop:step' (or 'start:stop:count' when counted) -> tuple of floats."""
    try:
        start, stop, third = (float(s) for s in text.split(':'))
    except ValueError as e:
        raise ConfigError(f"expected start:stop:{'count' if counted else 'step'}, got '{text}'") from e
    if counted:
        if third < 1 or stop < start:
            raise ConfigError(f"invalid range '{text}'")
        return start, stop, int(third)
    if third <= 0 or stop < start:
        raise ConfigError(f"invalid grid '{text}'")
    return start, stop, third


def build_parser():
    parser = argparse.ArgumentParser(prog='barropt', description='Optimal barrier strategies with state-dependent reward.')
    parser.add_argument('--threads', type=int, default=None, help='worker processes (speed only, never results)')
    parser.add_argument('--tol', type=float, default=None, help='relative HJB tolerance override')
    parser.add_argument('--quiet', action='store_true', help='only warnings and errors')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    parser.add_argument('--config', default=None, help='config.yaml providing numerical defaults')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('scale', help='tabulate W, W\', W\'\', Z')
    p.add_argument('--model', required=True)
    p.add_argument('--grid', default='0:10:0.01', help='start:stop:step')
    p.add_argument('--out', required=True)

    p = sub.add_parser('one-barrier', help='threshold b* of the one-barrier problem')
    p.add_argument('--model', required=True)
    p.add_argument('--reward', required=True)
    p.add_argument('--upper', type=float, default=None)
    p.add_argument('--out', required=True)
    p.add_argument('--grid-out', default=None, help='CSV u,F,Fprime')

    p = sub.add_parser('solve', help='multibarrier construction')
    p.add_argument('--model', required=True)
    p.add_argument('--reward', required=True)
    p.add_argument('--max-barriers', type=int, default=None, dest='max_barriers')
    p.add_argument('--upper', type=float, default=None)
    p.add_argument('--out', required=True)
    p.add_argument('--trace', default=None, help='CSV stage,k,v,z,F,genH')

    p = sub.add_parser('verify', help='HJB and smooth-pasting check of a barrier set')
    p.add_argument('--model', required=True)
    p.add_argument('--reward', required=True)
    p.add_argument('--barriers', required=True, help='comma separated, e.g. 0.9165,1.1496,2.1925')
    p.add_argument('--upper', type=float, default=None, help='right end of the check grid')
    p.add_argument('--out', required=True)
    p.add_argument('--csv', default=None, help='CSV x,genV,g_minus_Vprime')

    p = sub.add_parser('simulate', help='Monte Carlo estimate of the expected reward')
    p.add_argument('--model', required=True)
    p.add_argument('--reward', required=True)
    p.add_argument('--barriers', required=True)
    p.add_argument('--x0', type=float, required=True)
    p.add_argument('--paths', type=int, default=None, dest='n_paths')
    p.add_argument('--dt', type=float, default=None)
    p.add_argument('--horizon', type=float, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--antithetic', action='store_true', default=None)
    p.add_argument('--bridge', action='store_true', default=None, dest='bridge_correction')
    p.add_argument('--out', required=True)
    p.add_argument('--trace', type=int, default=0, dest='n_trace', help='number of paths to trace')
    p.add_argument('--trace-out', default=None, dest='trace_out')

    p = sub.add_parser('sweep', help='auxiliary surface F(v, z) and the z(v) curve')
    p.add_argument('--model', required=True)
    p.add_argument('--reward', required=True)
    p.add_argument('--barriers', required=True)
    p.add_argument('--v', required=True, help='start:stop:count')
    p.add_argument('--z', required=True, help='start:stop:count')
    p.add_argument('--out', required=True, help='surface CSV v,z,F,dFdz')
    p.add_argument('--curve-out', default=None, dest='curve_out', help='CSV v,z,Fmax,boundary,genH')

    p = sub.add_parser('batch', help='run every case of a config.yaml')
    p.add_argument('batch_config', nargs='?', default=None)

    return parser


def _settings(args):
    config = load_config(args.config) if args.config else {}
    search = build_options(SearchOptions, section(config, 'search'),
                           upper=getattr(args, 'upper', None), max_barriers=getattr(args, 'max_barriers', None))
    hjb = build_options(HjbGridSpec, section(config, 'hjb'), tol_rel=args.tol)
    sim = build_options(SimConfig, section(config, 'simulation'),
                        threads=args.threads or (config.get('global', {}) or {}).get('threads'),
                        **{k: getattr(args, k, None) for k in ('n_paths', 'dt', 'horizon', 'seed', 'antithetic',
                                                             'bridge_correction', 'x0')})
    return search, hjb, sim


def _load(args):
    if not os.path.exists(args.model):
        raise ConfigError(f"model file not found: {args.model}")
    model = LevyModel.from_file(args.model)
    reward = None
    if getattr(args, 'reward', None):
        if not os.path.exists(args.reward):
            raise ConfigError(f"reward file not found: {args.reward}")
        reward = RewardFunction.from_file(args.reward)
    return model, reward


def _echo(args, model, reward, **extra):
    config = {k: v for k, v in vars(args).items() if v is not None}
    config['model_spec'] = model.to_dict()
    if reward is not None:
        config['reward_spec'] = reward.to_dict()
    config.update(extra)
    return make_header(args.command, config)


def cmd_scale(args):
    model, _ = _load(args)
    sf = ScaleFunctions(model)
    start, stop, step = parse_range(args.grid)
    grid = np.arange(start, stop + 0.5 * step, step)
    write_csv(args.out, scale_table(sf, grid), _echo(args, model, None, phi=sf.phi, a_star=sf.a_star()))
    return EXIT_OK


def cmd_one_barrier(args):
    model, reward = _load(args)
    search, _, _ = _settings(args)
    sf = ScaleFunctions(model)
    solution = find_bstar(sf, reward, search)
    header = _echo(args, model, reward, search=asdict(search))
    result = solution.to_dict()
    result['a_star'] = sf.a_star()
    write_json(args.out, header, result)
    if args.grid_out:
        write_csv(args.grid_out, solution.diagnostics, header)
    return EXIT_OK


def cmd_solve(args):
    model, reward = _load(args)
    search, _, _ = _settings(args)
    sf = ScaleFunctions(model)
    solution = solve(sf, reward, search)
    header = _echo(args, model, reward, search=asdict(search))
    write_json(args.out, header, solution.to_dict())
    if args.trace:
        write_csv(args.trace, solution.trace, header)
    return EXIT_OK


def cmd_verify(args):
    model, reward = _load(args)
    _, hjb, _ = _settings(args)
    if args.upper is not None:
        hjb = build_options(HjbGridSpec, asdict(hjb), upper=args.upper)
    sf = ScaleFunctions(model)
    bset = BarrierSet.parse(args.barriers)
    report = check_hjb(model, ValueFunction(sf, reward, bset), hjb)
    header = _echo(args, model, reward, hjb=asdict(hjb))
    write_json(args.out, header, report.to_dict())
    if args.csv:
        write_csv(args.csv, report.to_frame(), header)
    return EXIT_OK if report.verdict else EXIT_VERIFY_FAILED


def cmd_simulate(args):
    model, reward = _load(args)
    _, _, sim = _settings(args)
    bset = BarrierSet.parse(args.barriers)
    estimate = simulate_value(model, reward, bset, sim)
    sf = ScaleFunctions(model)
    result = estimate.to_dict()
    result['analytic'] = float(ValueFunction(sf, reward, bset)(args.x0))
    header = _echo(args, model, reward, simulation=asdict(sim))
    write_json(args.out, header, result)
    if args.n_trace and args.trace_out:
        write_csv(args.trace_out, simulate_paths(model, reward, bset, sim, args.n_trace), header)
    return EXIT_OK


def cmd_sweep(args):
    model, reward = _load(args)
    search, _, _ = _settings(args)
    sf = ScaleFunctions(model)
    bset = BarrierSet.parse(args.barriers)
    surface, curve = sweep(sf, reward, bset, parse_range(args.v, counted=True), parse_range(args.z, counted=True),
                           search)
    header = _echo(args, model, reward)
    write_csv(args.out, surface, header)
    if args.curve_out:
        write_csv(args.curve_out, curve, header)
    return EXIT_OK


def cmd_batch(args):
    from process.BarrierProcessor import BarrierProcessor
    path = args.batch_config or args.config or 'config.yaml'
    summary = BarrierProcessor(path, threads=args.threads).run_all()
    failed = [name for name, result in summary.items()
              if 'verify' in result and result['verify']['verdict'] != 'pass']
    if failed:
        logger.info(f"   HJB verification failed for {failed}")
    return EXIT_OK


COMMANDS = {
    'scale': cmd_scale,
    'one-barrier': cmd_one_barrier,
    'solve': cmd_solve,
    'verify': cmd_verify,
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'batch': cmd_batch,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    set_verbosity(quiet=args.quiet, verbose=args.verbose)

    logger.info('=' * 80)
    logger.info(f"barropt {args.command}")
    try:
        return COMMANDS[args.command](args)
    except BarroptError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
