"""Command-line entry point: ``greentopo --experiment apc-ufr --out results``.

Exit status is 0 on success, 2 when the configuration or flags fail
validation, and 3 when the requested problem is infeasible.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, load_config
from .errors import InfeasibleError, ValidationError
from .experiments import run_experiment, write_outputs

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("greentopo")


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="greentopo",
        description="Minimize base-station area power under coverage constraints and "
                    "emit plot-ready CSV sweeps.")
    ap.add_argument("--config", help="INI file with [env], [power], [constraints], [experiment]")
    ap.add_argument("--experiment", choices=EXPERIMENTS,
                    help="experiment id (overrides [experiment] id in the config)")
    ap.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    ap.add_argument("--seed", type=_u64, default=0, help="Monte-Carlo seed (default: 0)")
    ap.add_argument("--oracle", action="store_true",
                    help="add grid-search and Monte-Carlo cross-checks")
    ap.add_argument("--trials", type=_positive_int, default=100_000,
                    help="Monte-Carlo trials per curve (default: %(default)s)")
    ap.add_argument("--integer-beta", action="store_true",
                    help="also report floor/ceil band counts with re-optimized power")
    ap.add_argument("--workers", type=_positive_int, default=1,
                    help="worker processes for sweeps and simulation (default: 1)")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags, which is our validation code too.
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_config(args.config, args.experiment)
        spec.out = args.out
        spec.seed = args.seed
        spec.oracle = args.oracle
        spec.trials = args.trials
        spec.integer_beta = args.integer_beta
        spec.workers = args.workers
        spec.validate()
        if spec.oracle and spec.trials < 10_000 and spec.experiment in ("coverage-curves", "custom"):
            log.warning("Monte-Carlo estimates with fewer than 10^4 trials are not reportable")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        tables, summary = run_experiment(spec)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc} (assumption: {exc.assumption})", file=sys.stderr)
        return EXIT_INFEASIBLE

    paths = write_outputs(tables, summary, spec.out)
    for p in paths:
        print(p)
    if summary.get("n_feasible") == 0:
        print("infeasible: no sweep point produced a feasible design", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
