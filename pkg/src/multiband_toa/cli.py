"""Command line entry point: ``multiband-toa simulate`` and ``multiband-toa predict-bias``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import MultibandError
from .simulation import PRESETS, emit_csv, emit_plotdata, load_config, load_preset, run_scenario


def _source(parser):
    parser.add_argument("--config", help="scenario TOML file")
    parser.add_argument("--preset", choices=PRESETS, help="built-in scenario")
    parser.add_argument("--weighting", choices=("identity", "eigen"),
                        help="override the config's weighting matrix")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiband-toa")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo RMSE sweep with analytic prediction")
    _source(sim)
    sim.add_argument("--trials", type=int, help="override trials per sweep point")
    sim.add_argument("--seed", type=int, help="override the master seed (unsigned 64-bit)")
    sim.add_argument("--serial", action="store_true", help="single process, bit-exact")
    sim.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    sim.add_argument("--out", required=True, help="CSV output path")
    sim.add_argument("--plotdata", help="also write JSON series for plotting")

    pb = sub.add_parser("predict-bias", help="analytic bias, CRLB and predicted RMSE only")
    _source(pb)
    pb.add_argument("--out", help="CSV output path (default: stdout)")
    return parser


def _load(args):
    if (args.config is None) == (args.preset is None):
        raise MultibandError("give exactly one of --config or --preset")
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    if args.weighting:
        cfg = cfg.replace(weighting=args.weighting)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "simulate":
            if args.trials is not None:
                cfg = cfg.replace(trials=args.trials)
            if args.seed is not None:
                if not 0 <= args.seed < 2 ** 64:
                    raise MultibandError("--seed must fit in an unsigned 64-bit integer")
                cfg = cfg.replace(seed=args.seed)
            table = run_scenario(cfg, serial=args.serial, workers=args.workers)
            emit_csv(table, args.out)
            if args.plotdata:
                emit_plotdata(table, args.plotdata)
        else:
            table = run_scenario(cfg.replace(trials=0))
            emit_csv(table, args.out if args.out else sys.stdout)
    except (MultibandError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
