"""Command-line entry point

    grassmann-prom offline --config exp.json
    grassmann-prom online --config exp.json [--points "a,b;c,d"]
    grassmann-prom report --out results/
    grassmann-prom verify [--out results/ [--coarse coarse_results/]]
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

import pandas as pd

from . import __version__
from .config import apply_overrides, load_config
from .constants import EXIT_CONFIG_ERROR, EXIT_NUMERIC_ERROR, EXIT_OK
from .errors import ArtifactError, ConfigError, NumericalError, OutOfDomainError
from .experiment import report, run_offline, run_online
from .verify import SUITES, check_orderings, check_refinement, run_checks

logger = logging.getLogger(__name__)


def parse_points(text: str) -> List[List[float]]:
    """`"a,b;c,d"` -> `[[a, b], [c, d]]`"""
    try:
        return [
            [float(v) for v in chunk.split(',')]
            for chunk in text.split(';')
            if chunk.strip()
        ]
    except ValueError as err:
        raise ConfigError(f'cannot parse query points {text!r}: {err}') from err


def _experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', required=True, help='Experiment JSON file.')
    parser.add_argument('--out', help='Output directory (overrides the config).')
    parser.add_argument('--seed', type=int, help='Master random seed.')
    parser.add_argument(
        '--variants',
        help='Comma-separated subset of global,local,entries,coefficients.',
    )
    parser.add_argument(
        '--tau', type=float, help='ECSW tolerance; enables hyper-reduction.'
    )
    parser.add_argument('--workers', type=int, help='Processes for HFM training runs.')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='grassmann-prom',
        description='Parametric reduced-order models of hysteretic structures.',
    )
    parser.add_argument('--version', action='version', version=__version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug output.')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings only.')

    commands = parser.add_subparsers(dest='command', required=True)

    offline = commands.add_parser('offline', help='Train snapshots and region models.')
    _experiment_args(offline)

    online = commands.add_parser('online', help='Evaluate query points.')
    _experiment_args(online)
    online.add_argument(
        '--points', help='Query points as "a,b;c,d" (overrides the config).'
    )

    summary = commands.add_parser('report', help='Aggregate online results.')
    summary.add_argument('--out', required=True, help='Experiment output directory.')

    verify = commands.add_parser('verify', help='Run the invariant suites.')
    verify.add_argument('--seed', type=int, default=0, help='Random seed.')
    verify.add_argument(
        '--suites', help=f'Comma-separated subset of {",".join(SUITES)}.'
    )
    verify.add_argument(
        '--out', help='Also check variant orderings of this output directory.'
    )
    verify.add_argument(
        '--coarse',
        help='Output directory of the same problem on a coarser partition; '
        'checks that --out lowers its coefficient errors.',
    )
    return parser


def _config(args: argparse.Namespace):
    cfg = load_config(args.config)
    return apply_overrides(
        cfg,
        seed=args.seed,
        variants=args.variants,
        tau=args.tau,
        out=args.out,
        workers=args.workers,
    )


def _print(frame: pd.DataFrame) -> None:
    if frame.empty:
        print('(no rows)')
    else:
        print(frame.to_string(index=False))


def _verify(args: argparse.Namespace) -> int:
    suites = None if args.suites is None else args.suites.split(',')
    unknown = [s for s in suites or () if s not in SUITES]
    if unknown:
        raise ConfigError(f'unknown suites {unknown}; choose from {tuple(SUITES)}')
    if args.coarse and not args.out:
        raise ConfigError('--coarse needs --out')
    results = run_checks(args.seed, suites)
    if args.out:
        results = pd.concat([results, check_orderings(args.out)], ignore_index=True)
    if args.coarse:
        refinement = check_refinement(args.coarse, args.out)
        results = pd.concat([results, refinement], ignore_index=True)
    _print(results)
    failed = results[~results['passed'].astype(bool)]
    if not failed.empty:
        logger.error('%d checks failed: %s', len(failed), ', '.join(failed['check']))
        return EXIT_NUMERIC_ERROR
    return EXIT_OK


def run(args: argparse.Namespace) -> int:
    if args.command == 'offline':
        run_offline(_config(args))
    elif args.command == 'online':
        points = None if args.points is None else parse_points(args.points)
        reports = run_online(_config(args), points)
        logger.info('%d comparison rows written', len(reports))
    elif args.command == 'report':
        _print(report(args.out))
    elif args.command == 'verify':
        return _verify(args)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )

    try:
        return run(args)
    except (ConfigError, OutOfDomainError, ArtifactError) as err:
        logger.error('%s', err)
        return EXIT_CONFIG_ERROR
    except NumericalError as err:
        logger.error('%s', err)
        return EXIT_NUMERIC_ERROR


if __name__ == '__main__':
    sys.exit(main())
