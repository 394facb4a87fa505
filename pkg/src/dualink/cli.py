"""Command line interface.

    dualink run --scenario equal_sweep --modulation bpsk \
        --ebn0-plc -6:8 --knowledge perfect,estimated --seed 1 --out results.csv

Eb/N0 arguments accept a comma list ("0,2,4"), a range "start:stop[:step]"
(inclusive), "down", or "fixed:X" for a fixed wireless value.

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .harness import SCENARIOS, ScenarioConfig, run_scenario
from .phy_types import ConfigError, load_params

__all__ = ["main"]


def _parse_ebn0(text: str, allow_fixed: bool = False):
    text = text.strip()
    if text.lower() == "down":
        return "down"
    if text.lower().startswith("fixed:"):
        if not allow_fixed:
            raise ConfigError("'fixed:' is only valid for --ebn0-wireless")
        return float(text.split(":", 1)[1])
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            start, stop, step = parts[0], parts[1], 1.0
        elif len(parts) == 3:
            start, stop, step = parts
        else:
            raise ConfigError(f"bad Eb/N0 range {text!r}")
        if step <= 0 or stop < start:
            raise ConfigError(f"bad Eb/N0 range {text!r}")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 6))
            v += step
        return tuple(values)
    return tuple(float(p) for p in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualink")
    parser.add_argument("--version", action="version", version=f"dualink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo BER scenario")
    run.add_argument("--scenario", choices=SCENARIOS, required=True)
    run.add_argument("--modulation", choices=("bpsk", "dbpsk"), default="bpsk")
    run.add_argument("--ebn0-plc", default="-6:8",
                     help="list, range or 'down' for the PLC link")
    run.add_argument("--ebn0-wireless", default="",
                     help="list, range, 'down' or 'fixed:X' for the wireless link")
    run.add_argument("--knowledge", default="perfect,estimated",
                     help="comma list drawn from perfect,estimated")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--min-bits", type=int, default=100_000)
    run.add_argument("--min-errors", type=int, default=100)
    run.add_argument("--max-bits", type=int, default=10_000_000)
    run.add_argument("--data-symbols", type=int, default=12)
    run.add_argument("--noise-mode", default="avg_time_freq",
                     choices=("instantaneous", "avg_time", "avg_time_freq"))
    run.add_argument("--combining", default="mrc",
                     choices=("mrc", "selection", "equal_gain"))
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--realtime", action="store_true",
                     help="pace frames at the nominal frame period")
    run.add_argument("--config", default=None,
                     help="PhyParams key=value file (validated; CLI flags win)")
    run.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            load_params(args.config)  # validate; overrides limited to the CLI flags
        wireless = args.ebn0_wireless
        cfg = ScenarioConfig(
            scenario=args.scenario,
            modulation=args.modulation,
            ebn0_plc_db=_parse_ebn0(args.ebn0_plc),
            ebn0_wireless_db=_parse_ebn0(wireless, allow_fixed=True) if wireless else (),
            knowledge=tuple(k.strip() for k in args.knowledge.split(",") if k.strip()),
            min_bits=args.min_bits,
            min_errors=args.min_errors,
            max_bits=args.max_bits,
            seed=args.seed,
            n_data_symbols=args.data_symbols,
            realtime_pacing=args.realtime,
            noise_mode=args.noise_mode,
            combining=args.combining,
            workers=args.workers,
        )
        cfg.validate()
        from .harness import build_grid
        build_grid(cfg)  # surface grid errors before any simulation
    except (ConfigError, ValueError) as exc:
        print(f"dualink: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        records = run_scenario(cfg, out_path=args.out)
    except OSError as exc:
        print(f"dualink: I/O error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(records)} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
