"""``twirlzne`` command-line runner."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import KINDS, ConfigError, ExperimentConfig, run_experiment
from .vqe import WORKERS_ENV, default_workers


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twirlzne",
                                 description="Randomized compiling + zero-noise extrapolation experiments for VQE.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="JSON config; defaults are used for missing keys")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output CSV (companions are written next to it)")
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("--stretch", action="store_true", help="allow the 12-qubit LiH fixtures")
        p.add_argument("--allow-partial", action="store_true", help="exit 0 even if some trials failed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = ExperimentConfig.load(args.config, kind=args.command, seed=args.seed, stretch=args.stretch)
        else:
            cfg = ExperimentConfig.from_json({}, kind=args.command, seed=args.seed, stretch=args.stretch)
        workers = args.workers if args.workers is not None else default_workers()
        report = run_experiment(cfg, workers)
    except ConfigError as exc:
        print(f"twirlzne: config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        for path in report.write(cfg, args.out):
            print(f"wrote {path}")
    else:
        sys.stdout.write(report.table.to_csv(report.meta(cfg)))
    for line in report.summary:
        print(line, file=sys.stderr)
    if report.failures:
        print(f"twirlzne: {report.failures} trial(s) failed", file=sys.stderr)
        if not args.allow_partial:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
