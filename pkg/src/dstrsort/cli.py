"""Command line: gen, sort, verify, bench.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import corpus
from .corpus import CorpusError, DnSpec
from .partition import PartitionError, parse_schedule
from .runner import ALGOS, RunConfig, dumps, metrics, report, run

CSV_COLUMNS = ["algo", "p", "k", "dn_ratio", "n", "bytes_exchange", "msgs_max_pe", "supersteps",
               "max_strings_pe", "max_chars_pe", "correct", "exchange_phases", "bytes_per_string"]


class UsageError(Exception):
    pass


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def cmd_gen(a) -> int:
    spec = DnSpec(a.n, a.len, a.dn_ratio, a.sigma, a.seed)
    arena = corpus.generate_dn(spec)
    corpus.write_corpus(arena, a.out, a.format)
    print(f"wrote {len(arena)} strings to {a.out}")
    print(f"D/N={corpus.measured_dn(arena):.4f} (target {a.dn_ratio})")
    return 0


def cmd_sort(a) -> int:
    arena = corpus.read_corpus(a.inp)
    schedule = parse_schedule(a.schedule) if a.schedule else None
    levels = len(schedule) if schedule and a.levels is None else (a.levels or 1)
    if schedule and len(schedule) != levels:
        raise UsageError(f"--schedule has {len(schedule)} factors but --levels is {levels}")
    cfg = RunConfig(algo=a.algo, p=a.pes, levels=levels, schedule=schedule, sampling=a.sampling,
                    sampling_factor=a.sampling_factor, assignment=a.assignment,
                    compress_lcp=a.compress_lcp, seed=a.seed)
    oracle = corpus.oracle_sort(arena.strings)
    out = run(arena.strings, cfg, verify=True, oracle=oracle)
    if a.out:
        if out.perm is not None:
            corpus.write_permutation(out.perm, a.out)
        else:
            corpus.write_corpus(out.output, a.out, a.format)
    rep = report(arena.strings, out, oracle)
    if a.report:
        Path(a.report).write_text(dumps(rep))
    m = rep["metrics"]
    print(f"{a.algo} p={a.pes} n={len(arena)} correct={out.correct} "
          f"bytes_exchange={m['bytes_exchange']} supersteps={m['supersteps']}")
    return 0 if out.correct else 1


def cmd_verify(a) -> int:
    original = corpus.read_corpus(a.inp).strings
    oracle = corpus.oracle_sort(original)
    if a.perm:
        perm = corpus.read_permutation(a.perm)
        if sorted(perm) != list(range(len(original))):
            print("FAIL: not a permutation of the input indices")
            return 1
        for i, (x, y) in enumerate(zip(perm, oracle.ids)):
            if x != y:
                print(f"FAIL: rank {i} holds input {x}, expected {y}")
                return 1
        print(f"OK: permutation of {len(perm)} strings matches")
        return 0
    result = corpus.read_corpus(a.sorted).strings
    if len(result) != len(original):
        print(f"FAIL: {len(result)} strings, expected {len(original)}")
        return 1
    for i, (x, y) in enumerate(zip(result, oracle.strings)):
        if x != y:
            print(f"FAIL: first mismatch at index {i}")
            return 1
    print(f"OK: {len(result)} strings sorted")
    return 0


def bench_cells(suite: str):
    if suite == "weak-dn":
        for p in (4, 16, 64):
            for dn in (0.0, 0.25, 0.5, 0.75, 1.0):
                for algo in ("ms", "pdms"):
                    yield algo, p, 2, dn
    elif suite == "weak-np":
        for p in (4, 16, 64):
            for k in (1, 2, 3):
                if k == 3 and p == 4:
                    continue
                for algo in ("ms", "pdms"):
                    yield algo, p, k, 0.5
    elif suite == "levels":
        for k in (1, 2, 3):
            for algo in ("ms", "pdms"):
                yield algo, 64, k, 0.5
    else:
        raise UsageError(f"unknown suite {suite!r}")


def cmd_bench(a) -> int:
    outdir = Path(a.out)
    outdir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    cache: dict = {}
    ok = True
    for algo, p, k, dn in bench_cells(a.suite):
        key = (p, dn)
        if key not in cache:
            arena = corpus.generate_dn(DnSpec(a.per_pe * p, a.len, dn, a.sigma, a.seed))
            cache = {key: (arena.strings, corpus.oracle_sort(arena.strings))}
        strings, oracle = cache[key]
        cfg = RunConfig(algo=algo, p=p, levels=k, compress_lcp=a.compress_lcp, seed=a.seed)
        out = run(strings, cfg, verify=True, oracle=oracle)
        ok &= bool(out.correct)
        m = metrics(out)
        row = {"algo": algo, "p": p, "k": k, "dn_ratio": dn, "n": len(strings), "correct": out.correct, **m}
        w.writerow(row)
        (outdir / f"{algo}_p{p}_k{k}_dn{dn}.json").write_text(dumps(report(strings, out, oracle)))
        print(f"{algo:5s} p={p:3d} k={k} dn={dn:.2f} bytes={m['bytes_exchange']} correct={out.correct}",
              flush=True)
    (outdir / f"{a.suite}.csv").write_text(buf.getvalue())
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dstrsort", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a corpus with a target D/N ratio")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--len", type=int, required=True)
    g.add_argument("--dn-ratio", type=float, required=True)
    g.add_argument("--sigma", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=["bin", "text"], default="bin")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sort", help="sort a corpus on the simulated machine")
    s.add_argument("--algo", choices=ALGOS, default="ms")
    s.add_argument("--pes", type=int, default=4)
    s.add_argument("--levels", type=int, default=None)
    s.add_argument("--schedule", default=None, help="split factors, e.g. 4x4")
    s.add_argument("--sampling", choices=["string", "char"], default="string")
    s.add_argument("--sampling-factor", type=int, default=None)
    s.add_argument("--assignment", choices=["grid", "bounded"], default="grid")
    s.add_argument("--compress-lcp", type=_on_off, default=False, metavar="{on,off}")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=["bin", "text"], default="bin")
    s.add_argument("--report", default=None)
    s.set_defaults(func=cmd_sort)

    v = sub.add_parser("verify", help="check a sorted corpus or a permutation")
    v.add_argument("--in", dest="inp", required=True)
    grp = v.add_mutually_exclusive_group(required=True)
    grp.add_argument("--sorted", default=None)
    grp.add_argument("--perm", default=None)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a desk-scale experiment grid")
    b.add_argument("--suite", choices=["weak-np", "weak-dn", "levels"], required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--per-pe", type=int, default=500)
    b.add_argument("--len", type=int, default=100)
    b.add_argument("--sigma", type=int, default=4)
    b.add_argument("--compress-lcp", type=_on_off, default=False, metavar="{on,off}")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        return a.func(a)
    except (UsageError, CorpusError, PartitionError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
