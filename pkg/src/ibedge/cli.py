"""Command-line front end.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np
from scipy.linalg import LinAlgError

from .config import ConfigError, load_config
from .gaussian_ib import SourceError, relevance_complexity_curve, solve_gib, write_curve_csv
from .simulator import run, sweep, write_slot_log, write_summary_csv, write_sweep_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("ibedge")


def _beta_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibedge", description="Gaussian-IB edge learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--out", help="output path prefix (overrides config 'output')")

    p = sub.add_parser("gib-curve", parents=[common], help="relevance/complexity curve of a source")
    p.add_argument("--betas", type=_beta_list, help="comma-separated beta grid (overrides config 'curve')")

    for name, help_ in (("simulate", "run one closed-loop simulation"),
                        ("sweep", "run a (V, G_avg, L_avg) trade-off sweep")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--seed", type=int, help="top-level seed (overrides config)")
        p.add_argument("--horizon", type=int, help="number of slots (overrides config)")
        if name == "simulate":
            p.add_argument("--log-slots", action="store_true", help="write the per-slot log")
        else:
            p.add_argument("--parallel", type=int, default=1, help="worker processes")
    return parser


def cmd_gib_curve(args) -> int:
    cfg = load_config(args.config)
    if args.betas is not None:
        betas = args.betas
    elif cfg.curve is not None:
        betas = cfg.curve.betas
    else:
        raise ConfigError("no beta grid: add a 'curve' block or pass --betas")
    points = relevance_complexity_curve(solve_gib(cfg.curve_source()), betas)
    path = write_curve_csv(points, f"{args.out or cfg.output}_curve.csv")
    print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scenario = cfg.build_scenario(seed=args.seed, horizon=args.horizon, record_slots=args.log_slots)
    print(f"seed={scenario.seed}", file=sys.stderr)
    result = run(scenario)
    if not np.all(np.isfinite(result.avg_latency)):
        log.warning("some devices accumulated infinite latency (zero resources with a nonzero payload)")
    prefix = args.out or cfg.output
    print(write_summary_csv(result, scenario.devices, f"{prefix}_summary.csv"))
    if args.log_slots:
        print(write_slot_log(result, f"{prefix}_slots.jsonl"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.sweep is None:
        raise ConfigError("config has no 'sweep' block")
    grid = cfg.sweep.grid()
    if not grid:
        raise ConfigError("sweep grid is empty")
    base = cfg.build_scenario(seed=args.seed, horizon=args.horizon)
    print(f"seed={base.seed}", file=sys.stderr)
    points = sweep(base, grid, parallel=max(1, args.parallel))
    print(write_sweep_csv(points, f"{args.out or cfg.output}_sweep.csv"))
    return EXIT_OK


COMMANDS = {"gib-curve": cmd_gib_curve, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LinAlgError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
