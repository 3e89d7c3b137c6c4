"""Command-line front end.

Subcommands::

    run      Monte-Carlo batch over trials x power points x modes
    sweep    power sweep (all modes; 0..30 dBm in 5 dB steps by default)
    trace    per-iteration convergence trace for one seed
    project  apply a candidate pattern set to the configured runs

Exit codes: 0 success, 1 configuration error, 2 batch finished with failed
trials (flagged as NaN rows in the CSV).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    convergence_trace,
    emit_csv,
    emit_trace_csv,
    load_candidate_set,
    parse_config,
    run_trials,
    sweep_config,
)
from .projection import PatternLoadError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trihybrid",
        description="Multi-user precoding simulator with reconfigurable radiation patterns",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "run": "run a Monte-Carlo batch and write one CSV row per trial",
        "sweep": "run a transmit-power sweep over all modes",
        "trace": "write the per-iteration convergence trace for one seed",
        "project": "project optimized patterns onto a candidate set",
    }
    for name, desc in descriptions.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", metavar="FILE", help="JSON config file")
        sp.add_argument("--seed", type=int, help="base seed (trial t uses seed+t)")
        sp.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
        sp.add_argument(
            "--pmax-dbm", type=float, nargs="+", metavar="DBM",
            help="transmit power budget(s) in dBm",
        )
        sp.add_argument(
            "--mode", choices=("trihybrid", "hybrid", "projected", "all"),
            help="which pipeline(s) to run",
        )
        sp.add_argument("--patterns", metavar="FILE", help="candidate pattern set file")
        sp.add_argument("--out", metavar="PATH", help="output CSV path")
        sp.add_argument(
            "--no-refit", action="store_true",
            help="skip re-optimizing the digital precoder after projection",
        )
        sp.add_argument("--workers", type=int, help="parallel trial workers")
        sp.add_argument("-v", "--verbose", action="store_true", help="log per-trial info")
    return parser


def _overrides(args) -> dict:
    out = {
        "seed": args.seed,
        "trials": args.trials,
        "mode": args.mode,
        "patterns_path": args.patterns,
        "out_path": args.out,
        "workers": args.workers,
    }
    if args.pmax_dbm is not None:
        out["pmax_dbm"] = tuple(args.pmax_dbm)
    if args.no_refit:
        out["refit"] = False
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = _overrides(args)
    if args.command == "trace" and args.out is None:
        overrides["out_path"] = "trace.csv"
    try:
        config = parse_config(args.config, overrides)
        if args.command == "sweep":
            config = sweep_config(config, args.pmax_dbm)
        elif args.command == "project":
            config = replace(config, mode="projected")

        if args.command == "trace":
            rows = convergence_trace(config, config.seed)
            emit_trace_csv(rows, config.out_path)
            print(f"wrote {len(rows)} trace rows to {config.out_path}")
            return 0

        if "projected" in config.modes():
            load_candidate_set(config)  # fail fast on a bad pattern file
        records = run_trials(config)
        emit_csv(records, config.out_path)
        failures = sum(1 for r in records if r.error is not None)
        for mode in config.modes():
            rates = [
                r.sum_rate for r in records if r.mode == mode and r.error is None
            ]
            if rates:
                print(
                    f"{mode}: {len(rates)} trials, mean sum rate "
                    f"{sum(rates) / len(rates):.4f} bits/s/Hz"
                )
        print(f"wrote {len(records)} records to {config.out_path}")
        if failures:
            print(f"{failures} trial(s) failed; see log", file=sys.stderr)
            return 2
        return 0
    except (ConfigError, PatternLoadError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
