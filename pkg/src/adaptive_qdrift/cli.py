"""Command-line entry point: ``adaptive-qdrift <command> --config run.yaml --out result.csv``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness

EXIT_CONFIG = 2
EXIT_RESOURCE = 3

COMMANDS = {
    "run": (harness.run_point, "fidelity at a single (t, n_steps) point"),
    "sweep-steps": (harness.sweep_steps, "fidelity versus step count at fixed step size"),
    "sweep-stepsize": (harness.sweep_stepsize, "fidelity versus step size at fixed t"),
    "trace-probs": (harness.trace_probabilities, "per-step adaptive sampling probabilities"),
    "shadow-bench": (harness.shadow_bench, "classical-shadow estimator calibration"),
}
_PARALLEL = {"run", "sweep-steps", "sweep-stepsize"}


def build_parser():
    parser = argparse.ArgumentParser(prog="adaptive-qdrift", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--format", choices=("csv", "json"),
                       help="output format (default: from --out suffix, else csv)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
    func = COMMANDS[args.command][0]
    try:
        config = harness.load_config(args.config)
        if args.seed is not None:
            config = config.replace(master_seed=args.seed)
        if args.jobs < 1:
            raise harness.ConfigError("--jobs must be >= 1")
        result = func(config, jobs=args.jobs) if args.command in _PARALLEL else func(config)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    harness.emit(result, fmt, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
