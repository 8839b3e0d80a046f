"""Command-line entry point: ``evsched --evs 300 --regime all --seed 1 --out-dir out``.

Exit codes: 0 success, 1 configuration error, 2 unusable input data.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .config import ConfigError, ScenarioConfig, coerce, flags_of, key_of, load_config
from .scenario import ScenarioDataError, run_seeds, seed_statistics

_HELP = {
    "fleet_size": "number of EVs",
    "seed": "base seed of the per-EV random streams",
    "seeds": "run seeds seed .. seed+N-1, one subdirectory each",
    "regime": "one regime name or 'all'",
    "charging_price_c": "retail charging price, Yuan/kWh",
    "alpha": "peak-valley incentive factor, Yuan/kW",
    "beta": "peak-valley weight, a number or 'auto'",
    "base_load_source": "'synthetic' or a slot,load_kw CSV",
    "fleet": "'generate' or a fleet CSV written by an earlier run",
    "incentive_reference": "'base' or 'no_incentive_schedule'",
    "out_dir": "output directory",
    "jobs": "worker processes for multi-seed runs",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evsched", description="Simulate one day of EV charging under five regimes.")
    p.add_argument("--config", metavar="PATH", help="key = value file; flags override it")
    p.add_argument("--quiet", action="store_true", help="do not print the comparison table")
    for f in fields(ScenarioConfig):
        p.add_argument(
            *flags_of(f.name),
            dest=f.name,
            metavar=key_of(f.name).upper().replace(".", "_"),
            default=None,
            help=f"{_HELP.get(f.name, '')} (default {f.default})".strip(),
        )
    return p


def parse_args(argv) -> tuple[ScenarioConfig, bool]:
    args = build_parser().parse_args(argv)
    overrides = {
        f.name: coerce(f.name, getattr(args, f.name))
        for f in fields(ScenarioConfig)
        if getattr(args, f.name) is not None
    }
    return load_config(args.config, overrides), args.quiet


def main(argv=None) -> int:
    try:
        config, quiet = parse_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"evsched: config error: {exc}", file=sys.stderr)
        return 1
    try:
        reports = run_seeds(config, config.out_dir)
    except ScenarioDataError as exc:
        print(f"evsched: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"evsched: cannot write outputs: {exc}", file=sys.stderr)
        return 2
    if not quiet:
        if len(reports) == 1:
            print(reports[0].table())
        else:
            stats = seed_statistics(reports, "peak_valley_kw")
            print(f"{len(reports)} seeds, peak-valley kW mean (sd):")
            for name, (mean, sd) in stats.items():
                print(f"  {name:<24}{mean:>10.1f} ({sd:.1f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
