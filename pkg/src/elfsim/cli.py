"""Command-line interface.

Subcommands:
  run           execute one configuration, writing trace.csv and summary.json
  sweep         run one configuration across several step sizes
  check-theory  print step-size thresholds and rate constants for a config
  validate      run the built-in self-check suites

Configs are JSON files; --set key=value (dotted keys allowed) overrides
fields before validation.  ELF_THREADS caps chain-level parallelism; outputs
are bitwise identical for any thread count.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import runner, validation


def _load_config(path: str, overrides: list[str]) -> runner.RunConfig:
    with open(path) as fh:
        cfg = json.load(fh)
    if overrides:
        cfg = runner.apply_overrides(cfg, overrides)
    return runner.RunConfig.from_dict(cfg)


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="path to a JSON run config")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config field (repeatable)")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="elfsim",
                                     description="compressed federated Langevin sampling")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configuration")
    _add_config_args(p_run)
    p_run.add_argument("--output", help="output directory (overrides config)")

    p_sweep = sub.add_parser("sweep", help="run a configuration across step sizes")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--gammas", required=True,
                         help="comma-separated step sizes, e.g. 0.1,0.05,0.025")
    p_sweep.add_argument("--output", help="output directory (overrides config)")

    p_check = sub.add_parser("check-theory", help="print thresholds and constants")
    _add_config_args(p_check)

    p_val = sub.add_parser("validate", help="run built-in self-checks")
    p_val.add_argument("--fast", action="store_true",
                       help="skip the slower statistical checks")

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            config = _load_config(args.config, args.overrides)
            if args.output:
                import dataclasses
                config = dataclasses.replace(config, output=args.output)
            result = runner.run(config)
            if result.summary_path:
                print(f"wrote {result.trace_path}")
                print(f"wrote {result.summary_path}")
            else:
                print(json.dumps({"final": result.summary["final"],
                                  "comm": result.summary["comm"]}, indent=2))
            if result.ensemble.diverged is not None:
                print(f"warning: diverged at round {result.ensemble.diverged}",
                      file=sys.stderr)
            return 0

        if args.command == "sweep":
            config = _load_config(args.config, args.overrides)
            if args.output:
                import dataclasses
                config = dataclasses.replace(config, output=args.output)
            try:
                gammas = [float(tok) for tok in args.gammas.split(",") if tok]
            except ValueError:
                print(f"error: bad --gammas value {args.gammas!r}", file=sys.stderr)
                return 2
            rows, sweep_path = runner.sweep(config, gammas)
            if sweep_path:
                print(f"wrote {sweep_path}")
            else:
                print(json.dumps(rows, indent=2))
            return 0

        if args.command == "check-theory":
            config = _load_config(args.config, args.overrides)
            report = runner.check_theory(config)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0

        # validate
        results = validation.run_suites(fast=args.fast)
        failed = 0
        for name, ok, detail in results:
            tag = "PASS" if ok else "FAIL"
            line = f"{tag} {name}"
            if detail and not ok:
                line += f": {detail}"
            print(line)
        failed = sum(1 for _, ok, _ in results if not ok)
        print(f"{len(results) - failed}/{len(results)} checks passed")
        return 1 if failed else 0

    except (ValueError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
