"""Command line interface of macrolab.

Every flag overrides the key of the same name in the `--config` JSON file,
which in turn overrides the `MACROLAB_*` environment variables.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from macrolab_model import DividendMode

from .exceptions import MacroLabError
from .experiment import OUTPUT_FILES, ExperimentRunner
from .settings import RunConfig

COMMANDS = {
    'simulate': 'simulate a generalized Atlas panel',
    'analyze': 'compute the market statistics of a panel',
    'backtest': 'run the diversity-weighted portfolio grid',
    'regress': 'fit the attribution model on the grid results',
    'report': 'run simulate/load, analyze, backtest and regress',
}


def _epilog() -> str:
    """Return the help text listing the output files."""
    lines = ['output files:']
    lines += [f'  {name:<26}{text}' for name, text in OUTPUT_FILES.items()]
    return '\n'.join(lines)


def _common_arguments() -> argparse.ArgumentParser:
    """Build the parent parser with the arguments of every subcommand.

    Returns:
        The parser, without its own help option.
    """
    parser = argparse.ArgumentParser(add_help=False)
    add = parser.add_argument
    add('--config', type=Path, help='flat JSON file with run settings')
    add('--verbose', action='store_true', help='log at debug level')
    add('--input', type=Path, help='panel-CSV file to analyze')
    add('--out', type=Path, help='output directory (env MACROLAB_OUT)')
    add('--n', type=int, help='number of simulated stocks')
    add('--years', type=int, help='number of simulated years')
    add('--seed', type=int, help='seed of the simulation and batches')
    add('--k', help='universe sizes, comma separated')
    add('--dt', help='excess growth rate grid spacings, comma separated')
    add('--p-grid', help='diversity parameters of the grid')
    add('--f-grid', help='rebalance frequencies of the grid (inf allowed)')
    add('--cost', type=float, help='proportional transaction cost rate')
    add('--dividend-mode', choices=[m.value for m in DividendMode],
        help='dividend handling of the backtests')
    add('--windows', help='calendar-year or start:end,start:end,...')
    add('--p', type=float, help='diversity parameter of the regression')
    add('--f', help='rebalance frequency of the regression')
    add('--subintervals', type=int, help='subintervals of cohort entropies')
    add('--batches', type=int, help='random batches per subinterval')
    add('--threads', type=int, help='worker threads')
    add('--results-db', help='database URL to store the grid results in')
    add('--run-label', help='label of the stored grid results')
    add('--wealth-curves', action='store_true', default=None,
        help='write one wealth curve file per run')
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser.

    Returns:
        The parser with one subcommand per step.
    """
    parser = argparse.ArgumentParser(
        prog='macrolab',
        description='Macroscopic market statistics and diversity-weighted '
        + 'portfolio backtests.',
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    common = _common_arguments()
    for name, text in COMMANDS.items():
        subparsers.add_parser(
            name,
            parents=[common],
            help=text,
            description=text,
            epilog=_epilog(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
    return parser


def _overrides(arguments: argparse.Namespace) -> dict[str, object]:
    """Collect the arguments given on the command line as settings.

    Args:
        arguments: the parsed arguments.

    Returns:
        The settings that were given, by field name.
    """
    skip = {'command', 'config', 'verbose'}
    return {
        key: value for key, value in vars(arguments).items()
        if key not in skip and value is not None
    }


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line interface.

    Args:
        argv: the arguments (default: `sys.argv[1:]`).

    Returns:
        The exit code: 0 on success, 1 on a macrolab error.
    """
    arguments = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if arguments.verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )
    try:
        config = RunConfig.from_sources(
            arguments.config, _overrides(arguments)
        )
        runner = ExperimentRunner(config)
        if arguments.command == 'simulate':
            runner.simulate()
        elif arguments.command == 'analyze':
            runner.analyze()
        elif arguments.command == 'backtest':
            runner.backtest()
        elif arguments.command == 'regress':
            runner.regress()
        else:
            runner.report()
    except MacroLabError as error:
        print(f'macrolab: error: {error}', file=sys.stderr)
        return 1
    return 0
