"""Write data/synthetic.csv: 4 variates, two tones each, noise 0.1, seed 7."""
import sys
from pathlib import Path

from daif.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(main(["synth", "--n-vars", "4", "--length", "4000", "--seed", "7", "--noise", "0.1",
                   "--out", str(ROOT / "data" / "synthetic.csv")]))
