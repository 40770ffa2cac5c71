"""Command-line interface.

Subcommands::

    jdcontrol run <experiment> --config FILE [--seed N] [--out DIR] [--workers N]
    jdcontrol grad-check --config FILE [--directions N] [--seed N]
    jdcontrol average-control --in FILE --out FILE

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, parse_config
from .control import load_control, save_control, time_average
from .errors import ConfigError, NumericalError
from .experiments import gradient_check, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jdcontrol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", required=True, help="run configuration file")
    run.add_argument("--seed", type=int, default=None, help="override ensemble.master_seed")
    run.add_argument("--out", default=None, help="override output.directory")
    run.add_argument("--workers", type=int, default=None, help="override ensemble.workers")

    check = sub.add_parser("grad-check", help="adjoint gradient vs finite differences")
    check.add_argument("--config", required=True)
    check.add_argument("--directions", type=int, default=20)
    check.add_argument("--seed", type=int, default=None)

    avg = sub.add_parser("average-control", help="time-average a saved control")
    avg.add_argument("--in", dest="in_path", required=True)
    avg.add_argument("--out", dest="out_path", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = parse_config(args.config, experiment=args.experiment)
            if args.seed is not None:
                config.master_seed = args.seed
            if args.out is not None:
                config.out_dir = args.out
            if args.workers is not None:
                if args.workers < 1:
                    raise ConfigError("ensemble.workers: must be >= 1")
                config.workers = args.workers
            _, paths = run_experiment(config)
            for name, path in sorted(paths.items()):
                print(f"{name}: {path}")
        elif args.command == "grad-check":
            config = parse_config(args.config)
            if args.seed is not None:
                config.master_seed = args.seed
            gradient_check(config, n_directions=args.directions)
        elif args.command == "average-control":
            save_control(time_average(load_control(args.in_path)), args.out_path)
            print(f"wrote {args.out_path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
