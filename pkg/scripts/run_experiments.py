"""Run every experiment config in ``configs/`` through the CLI.

    python3 scripts/run_experiments.py                  # all configs -> results/
    python3 scripts/run_experiments.py landscape precision --workers 4

Each config ``configs/<name>.json`` writes ``results/<name>.csv`` plus its
companion tables and trial logs.  Re-running with the same configs and seeds
reproduces the outputs byte for byte.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from twirlzne.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run(names, out_dir: Path, workers: int) -> int:
    status = 0
    for name in names:
        cfg = ROOT / "configs" / f"{name}.json"
        kind = json.loads(cfg.read_text())["kind"]
        t0 = time.perf_counter()
        code = main([kind, "--config", str(cfg), "--out", str(out_dir / f"{name}.csv"),
                     "--workers", str(workers)])
        print(f"[{name}] exit {code} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        status = max(status, code)
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="config names without .json (default: all)")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    names = args.names or sorted(p.stem for p in (ROOT / "configs").glob("*.json"))
    sys.exit(run(names, args.out_dir, args.workers))
