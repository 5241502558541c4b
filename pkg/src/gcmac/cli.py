"""Command-line entry point.

    gcmac analyze  [--config FILE] [--regime sat-ti] [--set key=value ...]
    gcmac optimize ...
    gcmac simulate [--scheme gcss] [--seed N] ...
    gcmac sweep    ...
    gcmac compare  ...

Exit codes: 0 success, 2 configuration error, 3 no feasible configuration.
"""
from __future__ import annotations

import argparse
import sys

from .analytics import Regime, evaluate
from .config import parse_config, render_report
from .errors import ConfigError, GcmacError, NoFeasibleConfigurationError
from .optimizer import optimize, sweep
from .simulator import compare_schemes, run

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gcmac", description="Group cooperative sensing MAC: analysis, optimization, simulation.")
    ap.add_argument("command", choices=["analyze", "optimize", "simulate", "sweep", "compare"])
    ap.add_argument("--config", help="JSON configuration file (default: built-in reference network)")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=["csv", "json"], default="json")
    ap.add_argument("--seed", type=int, help="simulation seed")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a configuration entry; repeatable")
    ap.add_argument("--scheme", choices=["gcss", "acss", "ecss"])
    ap.add_argument("--regime", choices=[r.value for r in Regime])
    ap.add_argument("--rate-pmf", choices=["exact", "paper-literal"])
    return ap


def _execute(args, rc):
    cmd = args.command
    sc = rc.scenario
    if cmd == "analyze":
        return evaluate(sc, rc.regime)
    if cmd == "optimize":
        return optimize(sc, rc.regime)
    if cmd == "sweep":
        return sweep(sc, rc.regime, rc.sweep_axis, rc.sweep_values)
    if cmd == "simulate":
        return run(rc.sim_config(args.scheme, args.seed))
    schemes = [args.scheme] if args.scheme else list(rc.schemes)
    seeds = [args.seed] if args.seed is not None else list(rc.seeds)
    return compare_schemes(rc.sim_config(), schemes, seeds)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.regime:
        overrides.append(f"regime={args.regime}")
    if args.rate_pmf:
        overrides.append(f"scenario.rate_pmf={args.rate_pmf}")
    try:
        rc = parse_config(args.config, overrides)
        result = _execute(args, rc)
        text = render_report(args.command, result, args.format, rc.document)
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasibleConfigurationError as exc:
        print(f"infeasible [{exc.constraint}]: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except GcmacError as exc:
        print(f"config error [parameters]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"config error [out]: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
