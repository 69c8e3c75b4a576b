"""Weak scaling over p and the level count at D/N 0.5. Writes per-cell
JSON reports and weak-np.csv, then prints PDMS against MS volume."""

import sys

from _common import run_suite

if __name__ == "__main__":
    sys.exit(run_suite("weak-np", "results/weak-np"))
