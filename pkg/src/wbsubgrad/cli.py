"""Command-line experiment runner.

    python -m wbsubgrad --preset paper_v --rounds 100000 --out runs/paper_v
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import balancing
from .errors import ConfigurationError
from .experiment import PRESETS, ExperimentConfig, parse_checkpoints, parse_config, parse_generate


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wbsubgrad",
        description="Run the weight-balancing distributed subgradient method on a directed graph.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--graph", metavar="PATH", help="edge file, one 'SRC DST' per line")
    src.add_argument("--generate", metavar="N,P,SEED",
                     help="random strongly connected graph: n-cycle plus edges with probability P")
    p.add_argument("--config", metavar="PATH", help="'key = value' config file; flags override it")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--rounds", type=int, metavar="T")
    p.add_argument("--schedule", metavar="sqrt|const:c")
    p.add_argument("--safety", type=float, metavar="S")
    p.add_argument("--weight-bound", choices=balancing.WEIGHT_BOUNDS,
                   help="safe initial-weight level (default: exact)")
    p.add_argument("--checkpoints", metavar="LIST", help="comma-separated rounds, each >= 4")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--verify-bounds", action="store_true", default=None,
                   help="exit with status 3 if a theoretical bound is violated")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace-stride", type=int, metavar="K", help="write every K-th round to trace.csv")
    p.add_argument("--message-log", action="store_true", default=None,
                   help="also write messages.csv with every broadcast")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = dict(
        preset=args.preset, graph=args.graph,
        generate=parse_generate(args.generate) if args.generate else None,
        rounds=args.rounds, schedule=args.schedule, safety=args.safety,
        weight_bound=args.weight_bound,
        checkpoints=parse_checkpoints(args.checkpoints) if args.checkpoints else None,
        out=args.out, verify_bounds=args.verify_bounds, seed=args.seed,
        trace_stride=args.trace_stride, message_log=args.message_log)
    text = Path(args.config).read_text() if args.config else ""
    return parse_config(text, **overrides)


def main(argv=None) -> int:
    from .experiment import run_experiment

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    if result.status != 0:
        print(result.message, file=sys.stderr)
        return result.status
    rep = result.report
    print(f"fitted C = {rep.fitted_C:.6g}, lambda = {rep.fitted_lambda:.6g}")
    print("T  ergodic_violation  optimality_gap  estimate_error")
    for T, ev, gap, err in zip(rep.checkpoints, rep.ergodic_violation,
                               rep.optimality_gap, rep.estimate_error):
        print(f"{T}  {ev:.6g}  {gap:.6g}  {err:.6g}")
    for name, path in result.outputs.items():
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
