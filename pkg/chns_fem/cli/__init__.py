"""
Command-line front end.

    chns-fem --config run.toml --mode simulate --out results --tau 0.01 --mesh 16 16
"""
# Standard library imports
import argparse
from typing import Dict, List, Optional, Sequence

# Package imports
from chns_fem.cli.config import RunConfig, RunMode, parse_config
from chns_fem.cli.runner import EXIT_CONFIG, EXIT_IO, run
from chns_fem.errors import ConfigError
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER, set_console_level


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('cli')

LOG_LEVELS = ('debug', 'info', 'warning', 'error')

# argparse destination -> dotted config key
FLAG_KEYS = {
    'mode':    'run.mode',
    'seed':    'run.seed',
    'out':     'output.directory',
    'tau':     'grid.tau',
    'steps':   'grid.steps',
    'epsilon': 'params.epsilon',
    'eta':     'params.eta',
    'gamma':   'params.gamma',
    'tol':     'newton.tol',
    'init':    'init.spec',
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='chns-fem',
        description='Energy-stable mixed finite element solver for the Cahn-Hilliard-Navier-Stokes system',
    )
    parser.add_argument('--config', type=str, default=None, help='TOML run configuration')
    parser.add_argument('--mode', type=str, default=None, choices=[m.value for m in RunMode],
                        help='What to run (default: simulate)')
    parser.add_argument('--out', type=str, default=None, help='Output directory (default: chns-output)')
    parser.add_argument('--seed', type=int, default=None, help='Seed of the random initial field and self-tests')
    parser.add_argument('--tau', type=float, default=None, help='Time step (default: 0.01)')
    parser.add_argument('--steps', type=int, default=None, help='Number of time steps (default: 100)')
    parser.add_argument('--mesh', type=int, nargs=2, default=None, metavar=('NX', 'NY'),
                        help='Structured mesh divisions (default: 16 16)')
    parser.add_argument('--epsilon', type=float, default=None, help='Interface width (default: 0.1)')
    parser.add_argument('--eta', type=float, default=None, help='Viscosity (default: 1)')
    parser.add_argument('--gamma', type=float, default=None, help='Capillary coefficient (default: 1)')
    parser.add_argument('--tol', type=float, default=None, help='Newton tolerance (default: 1e-11)')
    parser.add_argument('--init', type=str, default=None,
                        help='exact-mms:<name>, random-seed:<int> or constant:<value> (default: random-seed:0)')
    parser.add_argument('--log-level', type=str, default=None, choices=LOG_LEVELS, dest='log_level',
                        help='Console log level (default: info)')

    return parser


def flag_overrides(args: argparse.Namespace) -> Dict[str, object]:
    """
    Dotted-key overrides for every flag that was given.
    """
    overrides = {key: getattr(args, dest) for dest, key in FLAG_KEYS.items() if getattr(args, dest) is not None}

    if args.mesh is not None:
        overrides['mesh.nx'], overrides['mesh.ny'] = args.mesh

    return overrides


def load(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """
    Parse `argv` and the referenced config file into a `RunConfig`.
    """
    args = build_parser().parse_args(argv)

    if args.log_level is not None:
        set_console_level(args.log_level)

    return parse_config(args.config, flag_overrides(args))


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the `chns-fem` script.

    Returns:
        int:
            The exit status: 0 on success, 1 on numerical failure, 2 on an invalid configuration, 3 on I/O errors.
    """
    log = MOD_LOGGER.get_child('main')

    try:
        config = load(argv)
    except ConfigError as exc:
        log.error(f'Invalid configuration: {exc}')
        return EXIT_CONFIG

    try:
        return run(config)
    except OSError as exc:
        log.error(f'I/O error: {exc}')
        return EXIT_IO


__all__ = [
    'build_parser',
    'flag_overrides',
    'load',
    'main',
]
