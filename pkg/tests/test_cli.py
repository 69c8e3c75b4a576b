import csv
import json
import subprocess
import sys

import pytest

from dstrsort import corpus
from dstrsort.cli import CSV_COLUMNS, main


def gen(tmp_path, name="in.bin", n=400, dn=0.5, seed=1, length=40):
    path = tmp_path / name
    assert main(["gen", "--n", str(n), "--len", str(length), "--dn-ratio", str(dn), "--seed", str(seed),
                 "--out", str(path)]) == 0
    return path


@pytest.mark.parametrize("algo", ["ms", "pdms", "rquick", "rquick+"])
@pytest.mark.parametrize("pes", [1, 4, 8])
def test_gen_sort_verify_chain(tmp_path, algo, pes):
    src = gen(tmp_path)
    out = tmp_path / "out"
    rep = tmp_path / "rep.json"
    levels = ["--levels", "2"] if pes == 8 and algo in ("ms", "pdms") else []
    code = main(["sort", "--algo", algo, "--pes", str(pes), *levels, "--in", str(src), "--out", str(out),
                 "--report", str(rep)])
    assert code == 0
    flag = "--perm" if algo == "pdms" else "--sorted"
    assert main(["verify", "--in", str(src), flag, str(out)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["schema"] == "dstrsort.report/1"
    assert doc["verdict"]["correct"] is True
    assert doc["input"]["n"] == 400


def test_verify_reports_first_bad_index(tmp_path, capsys):
    src = gen(tmp_path)
    out = tmp_path / "out.bin"
    main(["sort", "--in", str(src), "--out", str(out)])
    xs = corpus.read_corpus(out).strings
    xs[10], xs[11] = xs[11], xs[10]
    corpus.write_corpus(xs, out)
    capsys.readouterr()
    assert main(["verify", "--in", str(src), "--sorted", str(out)]) == 1
    assert "index 10" in capsys.readouterr().out


def test_verify_rejects_bad_permutation(tmp_path, capsys):
    src = gen(tmp_path, n=50)
    perm = tmp_path / "p.bin"
    corpus.write_permutation([0] * 50, perm)
    assert main(["verify", "--in", str(src), "--perm", str(perm)]) == 1
    good = corpus.oracle_sort(corpus.read_corpus(src).strings).ids
    good[3], good[4] = good[4], good[3]
    corpus.write_permutation(good, perm)
    assert main(["verify", "--in", str(src), "--perm", str(perm)]) == 1
    assert "rank 3" in capsys.readouterr().out


def test_bad_arguments_exit_with_2(tmp_path):
    src = gen(tmp_path)
    assert main(["sort", "--pes", "6", "--schedule", "4x4", "--in", str(src)]) == 2
    assert main(["sort", "--pes", "16", "--levels", "3", "--schedule", "4x4", "--in", str(src)]) == 2
    assert main(["sort", "--in", str(tmp_path / "missing.bin")]) == 2
    assert main(["gen", "--n", "100", "--len", "2", "--dn-ratio", "0.5", "--out", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as e:
        main(["sort", "--compress-lcp", "maybe", "--in", str(src)])
    assert e.value.code == 2


def test_module_entry_point(tmp_path):
    src = gen(tmp_path, n=30)
    r = subprocess.run([sys.executable, "-m", "dstrsort.cli", "sort", "--in", str(src), "--pes", "3"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "correct=True" in r.stdout


def test_empty_corpus(tmp_path):
    src = tmp_path / "empty.bin"
    assert main(["gen", "--n", "0", "--len", "10", "--dn-ratio", "0.5", "--out", str(src)]) == 0
    out = tmp_path / "o.bin"
    assert main(["sort", "--pes", "4", "--in", str(src), "--out", str(out)]) == 0
    assert main(["verify", "--in", str(src), "--sorted", str(out)]) == 0


def test_same_seed_same_bytes(tmp_path):
    a = gen(tmp_path, "a.bin", seed=5)
    b = gen(tmp_path, "b.bin", seed=5)
    c = gen(tmp_path, "c.bin", seed=6)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    for name in ("ra.json", "rb.json"):
        main(["sort", "--algo", "pdms", "--pes", "16", "--levels", "2", "--in", str(a), "--report",
              str(tmp_path / name)])
    assert (tmp_path / "ra.json").read_bytes() == (tmp_path / "rb.json").read_bytes()


def test_text_format_roundtrip(tmp_path):
    src = tmp_path / "t.txt"
    main(["gen", "--n", "100", "--len", "20", "--dn-ratio", "0.3", "--out", str(src), "--format", "text"])
    out = tmp_path / "o.txt"
    assert main(["sort", "--in", str(src), "--out", str(out), "--format", "text"]) == 0
    assert main(["verify", "--in", str(src), "--sorted", str(out)]) == 0


def test_pdms_with_compression_beats_ms_at_low_ratio(tmp_path):
    src = gen(tmp_path, n=16 * 300, dn=0.25, length=200)
    for algo in ("ms", "pdms"):
        main(["sort", "--algo", algo, "--pes", "16", "--levels", "2", "--compress-lcp", "on", "--in", str(src),
              "--report", str(tmp_path / f"{algo}.json")])
    ms = json.loads((tmp_path / "ms.json").read_text())["metrics"]["bytes_exchange"]
    pd = json.loads((tmp_path / "pdms.json").read_text())["metrics"]["bytes_exchange"]
    assert pd < ms


def _bench(tmp_path, suite, name):
    out = tmp_path / name
    assert main(["bench", "--suite", suite, "--out", str(out), "--per-pe", "20", "--len", "30"]) == 0
    return out


def test_bench_weak_dn_is_deterministic(tmp_path):
    a = _bench(tmp_path, "weak-dn", "a")
    b = _bench(tmp_path, "weak-dn", "b")
    assert (a / "weak-dn.csv").read_bytes() == (b / "weak-dn.csv").read_bytes()
    rows = list(csv.DictReader((a / "weak-dn.csv").open()))
    assert len(rows) == 30
    assert list(rows[0]) == CSV_COLUMNS
    assert all(r["correct"] == "True" for r in rows)
    assert len(list(a.glob("*.json"))) == 30


def test_bench_levels_exchange_phases(tmp_path):
    out = _bench(tmp_path, "levels", "lv")
    rows = list(csv.DictReader((out / "levels.csv").open()))
    assert [int(r["k"]) for r in rows] == [1, 1, 2, 2, 3, 3]
    assert all(int(r["exchange_phases"]) == int(r["k"]) for r in rows)
