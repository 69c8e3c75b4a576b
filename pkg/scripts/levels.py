"""Level count k in 1..3 at p=64, D/N 0.5. Writes per-cell JSON reports
and levels.csv, then prints PDMS against MS volume."""

import sys

from _common import run_suite

if __name__ == "__main__":
    sys.exit(run_suite("levels", "results/levels"))
