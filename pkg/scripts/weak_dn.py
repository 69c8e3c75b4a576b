"""Weak scaling over the D/N ratio at k=2 for p in 4, 16, 64. Writes
per-cell JSON reports and weak-dn.csv, then prints PDMS against MS volume."""

import sys

from _common import run_suite

if __name__ == "__main__":
    sys.exit(run_suite("weak-dn", "results/weak-dn"))
