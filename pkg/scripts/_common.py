"""Shared argument handling for the bench scripts."""

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dstrsort.cli import main as cli_main  # noqa: E402


def run_suite(suite: str, default_out: str) -> int:
    ap = argparse.ArgumentParser(description=f"run the {suite} bench suite and print a summary")
    ap.add_argument("--out", default=default_out)
    ap.add_argument("--per-pe", type=int, default=500)
    ap.add_argument("--len", type=int, default=100)
    ap.add_argument("--compress-lcp", choices=["on", "off"], default="off")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    code = cli_main(["bench", "--suite", suite, "--out", a.out, "--per-pe", str(a.per_pe), "--len", str(a.len),
                     "--compress-lcp", a.compress_lcp, "--seed", str(a.seed)])
    summarize(Path(a.out) / f"{suite}.csv")
    return code


def summarize(path: Path) -> None:
    rows = list(csv.DictReader(path.open()))
    ms = {(r["p"], r["k"], r["dn_ratio"]): r for r in rows if r["algo"] == "ms"}
    print(f"\n{'p':>4} {'k':>2} {'D/N':>5} {'ms bytes':>12} {'pdms bytes':>12} {'pdms/ms':>8} {'supersteps':>10}")
    for r in rows:
        if r["algo"] != "pdms":
            continue
        m = ms[(r["p"], r["k"], r["dn_ratio"])]
        ratio = int(r["bytes_exchange"]) / max(1, int(m["bytes_exchange"]))
        print(f"{r['p']:>4} {r['k']:>2} {float(r['dn_ratio']):5.2f} {m['bytes_exchange']:>12} "
              f"{r['bytes_exchange']:>12} {ratio:8.3f} {r['supersteps']:>10}")
