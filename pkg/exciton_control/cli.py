#!/usr/bin/env python3
"""
exciton-control command line

    exciton-control run --preset beam_kick --out results/beam_kick
    exciton-control run --config my_scan.toml --jobs 4
    exciton-control validate --config my_scan.toml
    exciton-control list-presets

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from config.experiment_config import load_config
from config.presets import list_presets

from .errors import BasisMismatchError, ConfigError, LatticeError, NumericalError, StateError
from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(out_dir: Optional[Path] = None, level: str = "INFO") -> None:
    """Console logging, plus ``<out_dir>/logs/run.log`` when an output directory is known."""
    handlers = [logging.StreamHandler()]
    if out_dir is not None:
        log_dir = Path(out_dir) / "logs"
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_dir / "run.log"))
    logging.basicConfig(level=getattr(logging, level.upper()), format=LOG_FORMAT,
                        handlers=handlers, force=True)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output.dir"] = str(args.out)
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exciton-control",
                                     description="Controlled energy transfer in molecular arrays")
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run an experiment and write its artifacts')
    validate = sub.add_parser('validate', help='Check a configuration without computing anything')
    for p in (run, validate):
        p.add_argument('--config', type=str, help='Path to a TOML experiment file')
        p.add_argument('--preset', type=str, help='Named experiment preset (see list-presets)')
        p.add_argument('--seed', type=int, help='Override the experiment seed')
        p.add_argument('--out', type=str, help='Output directory (overrides output.dir)')
    run.add_argument('--jobs', type=int, help='Worker cap for realization ensembles')
    run.add_argument('--tolerance', type=float, help='Pulsed integrator tolerance')

    sub.add_parser('list-presets', help='Show the experiment presets')
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.preset, _overrides(args))
    out_dir = Path(config.output.dir)
    configure_logging(out_dir, args.log_level)
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    if args.tolerance is not None and not args.tolerance > 0:
        raise ConfigError(f"--tolerance must be positive, got {args.tolerance}")
    runner = ExperimentRunner(config, out_dir, jobs=args.jobs, tolerance=args.tolerance)
    runner.run()
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.preset, _overrides(args))
    logger.info(f"Configuration OK: {config.kind} experiment '{config.name}'")
    return EXIT_OK


def cmd_list_presets(args: argparse.Namespace) -> int:
    for name, kind, summary, reproduces in list_presets():
        print(f"{name:<17} {kind:<13} {summary}  [reproduces: {reproduces}]")
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'validate': cmd_validate,
    'list-presets': cmd_list_presets,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (ConfigError, LatticeError, StateError, BasisMismatchError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except ValueError as e:
        logger.error(f"Invalid experiment parameters: {e}")
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
