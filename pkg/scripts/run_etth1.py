"""ETTh1 comparison: no augmentation vs DAIF-CvP (P=16) vs DAIF-FF (K=5).

Expects the benchmark CSV at data/ETTh1.csv (or pass --data). Runs all
four horizons and three seeds per strategy through the CLI, so each run
leaves checkpoints, histories and a results.csv under runs/etth1/<strategy>.
This takes hours on a CPU.
"""
import argparse
import sys
from pathlib import Path

from daif.cli import main as cli
from daif.results import read_results

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "etth1.json"))
    ap.add_argument("--strategies", default="none,cvp,ff")
    ap.add_argument("--backbone", default="attention")
    args = ap.parse_args()

    summary = {}
    for strategy in args.strategies.split(","):
        out = ROOT / "runs" / "etth1" / f"{args.backbone}_{strategy}"
        code = cli(["train", "--config", args.config, "--strategy", strategy,
                    "--backbone", args.backbone, "--out", str(out)])
        if code:
            return code
        avg = [r for r in read_results(out / "results.csv") if r.S == "avg"]
        summary[strategy] = sum(r.mse for r in avg) / len(avg)
    for strategy, mse in summary.items():
        print(f"{strategy:>9}  average mse over S and seeds: {mse:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
