"""Command-line entry point: ``renewal-cma <experiment> --config path.json``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, Experiment, load_config
from .experiments import run, write_result

log = logging.getLogger("renewal_cma")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="renewal-cma",
        description="Monte Carlo studies and asymptotic tables for renewal-sampled moving averages.",
        epilog="Flags override the JSON config, which overrides built-in defaults.",
    )
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--config", help="JSON experiment config (defaults are used when omitted)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--threads", type=int, help="worker processes (overrides config)")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {"experiment": args.experiment, "seed": args.seed, "threads": args.threads, "output_dir": args.out}
    try:
        cfg = load_config(args.config, overrides)
        result = run(cfg)
        files = write_result(result, cfg.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        log.info("wrote %s", f)
    if result.failed:
        print("numeric failure: some cells or points could not be computed; see report.json", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
