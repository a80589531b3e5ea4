"""Patch-length and top-K sensitivity sweep (writes sweep.csv via the bench command).

    DAIF_THREADS=4 python scripts/sweep_pk.py [--config configs/synthetic_sweep.json]
"""
import argparse
import csv
import sys
from pathlib import Path

from daif.cli import main as cli
from daif.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "synthetic_sweep.json"))
    args = ap.parse_args()
    exp = load_config(args.config)
    if not exp.dataset_path.exists():
        cli(["synth", "--out", str(exp.dataset_path)])
    code = cli(["bench", "--config", args.config])
    if code:
        return code
    with (exp.output_dir / "sweep.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            print(f"{row['axis']}={row['value']:>3} ({row['kind']:>5}, M={row['M']:>2})"
                  f"  seed {row['seed']}  mse {row['mse'] or '-':>8}  {row['status']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
