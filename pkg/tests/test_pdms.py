import math

import numpy as np
import pytest

from dstrsort.bloom import dsbf_round, exact_duplicates
from dstrsort.corpus import DnSpec, generate_dn, generate_duplicates, generate_random, oracle_sort
from dstrsort.msort import MsConfig, ms_sort
from dstrsort.pdms import (DuplicateStringError, PdmsConfig, approximate_dist_prefixes, dedup_by_sorting,
                           initial_length, pdms_sort, switch_threshold)
from dstrsort.runner import RunConfig, distribute, overshoot_summary, report, run
from dstrsort.simnet import Machine, is_exchange_phase
from dstrsort.strcore import distinguishing_prefixes


def brute_d(xs):
    """Distinguishing prefix length of each input string by pairwise comparison."""
    out = []
    for i, s in enumerate(xs):
        best = 0
        for j, t in enumerate(xs):
            if i != j:
                l = 0
                while l < len(s) and l < len(t) and s[l] == t[l]:
                    l += 1
                best = max(best, l)
        out.append(min(len(s), best + 1))
    return out


def approx(xs, p, **kw):
    ms = MsConfig(levels=kw.pop("levels", 1))
    res = approximate_dist_prefixes(Machine(p, seed=kw.pop("seed", 0)), distribute(xs, p), PdmsConfig(ms, **kw))
    return [d for part in res.lengths for d in part], res


def test_initial_length_and_threshold():
    assert initial_length(2) == 4
    assert initial_length(2**40) == 8
    assert initial_length(2**40, sigma=2) == 64
    assert switch_threshold(1, 1) == 0
    assert switch_threshold(16, 2) == 4 * 64 * 4
    assert switch_threshold(64, 3) == math.ceil(9 * 64 ** (4 / 3) * 6)


@pytest.mark.parametrize("L", [1, 3, 4, 5, 9, 16, 17, 40])
def test_doubling_on_minimal_pair(L):
    xs = [b"a" * L + b"0", b"a" * L + b"1"]
    got, res = approx(xs, 2, m_factor=1000)
    want = 4
    while want < L + 1:
        want *= 2
    assert got == [min(want, L + 1)] * 2


def test_distinct_first_characters_stop_at_initial_length():
    xs = [bytes([c]) + b"x" * 20 for c in range(1, 200)]
    got, res = approx(xs, 4, m_factor=100)
    # a string survives the first round unless its hash collides, about 1/100
    first = sum(g == res.init_len for g in got)
    assert first >= 0.95 * len(xs)
    assert max(got) <= 2 * res.init_len


@pytest.mark.parametrize("seed", range(4))
def test_approximation_dominates_exact_small(seed):
    xs = generate_duplicates(300, 120, 12, sigma=3, seed=seed).strings
    xs = list(dict.fromkeys(xs))  # distinct
    xs += generate_random(100, 1, 12, sigma=3, seed=seed).strings
    d = brute_d(xs)
    got, _ = approx(xs, 4, seed=seed)
    assert all(a >= b for a, b in zip(got, d))
    assert all(a <= len(s) for a, s in zip(got, xs))


def test_approximation_on_dn_data_is_within_factor():
    xs = generate_dn(DnSpec(8 * 1000, 200, 0.5, seed=3)).strings
    srt = oracle_sort(xs)
    dd = distinguishing_prefixes(srt).lengths
    d = [0] * len(xs)
    for rank, i in enumerate(srt.ids):
        d[i] = dd[rank]
    got, _ = approx(xs, 8, levels=2)
    assert all(a >= b for a, b in zip(got, d))
    assert np.mean([a / b for a, b in zip(got, d)]) <= 4


def test_threshold_choice_does_not_change_result():
    xs = generate_random(600, 1, 30, sigma=4, seed=7).strings
    by_bloom, r1 = approx(xs, 4, threshold=0)
    by_sort, r2 = approx(xs, 4, threshold=10**9)
    assert by_bloom == by_sort
    assert {r.method for r in r1.rounds} == {"bloom"}
    assert {r.method for r in r2.rounds} == {"sort"}


def _positions(p, seed, m):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, m, size=rng.integers(0, 50)).astype(np.uint64) for _ in range(p)]


def _ids(pos):
    out, k = [], 0
    for x in pos:
        out.append(list(range(k, k + len(x))))
        k += len(x)
    return out


def test_dedup_by_sorting_all_distinct():
    pos = [np.array([1, 5], dtype=np.uint64), np.array([3], dtype=np.uint64), np.array([9, 0], dtype=np.uint64)]
    got = dedup_by_sorting(Machine(3), pos, _ids(pos))
    assert not any(g.any() for g in got)


def test_dedup_by_sorting_across_three_pes():
    pos = [np.array([7, 1], dtype=np.uint64), np.array([7], dtype=np.uint64), np.array([2, 7], dtype=np.uint64)]
    got = dedup_by_sorting(Machine(3), pos, _ids(pos))
    assert [g.tolist() for g in got] == [[True, False], [True], [False, True]]


@pytest.mark.parametrize("p,seed", [(1, 0), (2, 1), (4, 2), (8, 3), (5, 4)])
def test_dedup_methods_agree(p, seed):
    pos = _positions(p, seed, 90)
    a = dedup_by_sorting(Machine(p), pos, _ids(pos))
    b = dsbf_round(Machine(p), pos, 90, [p])
    c = exact_duplicates(pos)
    assert all(np.array_equal(x, y) and np.array_equal(x, z) for x, y, z in zip(a, b, c))


def test_round_count_bound():
    xs = generate_dn(DnSpec(4 * 2000, 300, 0.75, seed=1)).strings
    _, res = approx(xs, 4)
    lmax = max(map(len, xs))
    assert len(res.rounds) <= math.ceil(math.log2(lmax / res.init_len)) + 1


def test_duplicates_are_reported_when_asked():
    xs = [b"abc", b"zz", b"abd", b"zz"]
    with pytest.raises(DuplicateStringError) as e:
        approx(xs, 2, on_duplicate="error")
    assert sorted(e.value.pair) == [1, 3]
    approx(xs, 2)  # allowed by default
    approx([b"abc", b"abd", b"ab"], 2, on_duplicate="error")


@pytest.mark.parametrize("kind", ["random", "dn", "dups"])
def test_pdms_permutation_matches_oracle(kind):
    p = 16
    if kind == "random":
        xs = generate_random(p * 200, 1, 30, sigma=5, seed=2).strings
    elif kind == "dn":
        xs = generate_dn(DnSpec(p * 200, 60, 0.25, seed=2)).strings
    else:
        xs = generate_duplicates(p * 200, 50, 20, seed=2).strings
    res = pdms_sort(Machine(p, seed=1), distribute(xs, p), PdmsConfig(MsConfig(levels=2)))
    assert res.perm == oracle_sort(xs).ids
    assert sorted(res.perm) == list(range(len(xs)))


def test_pdms_handles_empty_pes():
    xs = [b"b", b"a", b"c"]
    parts = [[], xs[:2], [], [xs[2]]]
    res = pdms_sort(Machine(4), parts, PdmsConfig(MsConfig(levels=2)))
    assert res.perm == [1, 0, 2]


def test_pdms_moves_fewer_bytes_than_full_strings():
    p = 16
    xs = generate_dn(DnSpec(p * 500, 200, 0.25, seed=5)).strings
    res_m = Machine(p)
    pdms_sort(res_m, distribute(xs, p), PdmsConfig(MsConfig(levels=2)))
    ms_m = Machine(p)
    ms_sort(ms_m, distribute(xs, p), MsConfig(levels=2))
    assert res_m.ledger.total("bytes_sent", is_exchange_phase) < ms_m.ledger.total("bytes_sent", is_exchange_phase)


def test_overshoot_summary_splits_short_prefixes():
    ov = overshoot_summary([4, 4, 8, 6], [1, 2, 4, 6], p=16, sigma=2)
    assert ov["split_at"] == 4
    assert ov["short"] == {"n": 2, "mean_ratio": 3.0}
    assert ov["rest"] == {"n": 2, "mean_ratio": 1.5}


def test_report_carries_overshoot():
    xs = generate_random(16 * 100, 1, 10, sigma=2, seed=3).strings
    out = run(xs, RunConfig("pdms", 16, 2))
    ov = report(xs, out)["doubling"]["overshoot"]
    assert ov["split_at"] == 0.5
    assert ov["short"]["n"] == 0 and ov["rest"]["n"] == len(xs)
    assert ov["rest"]["mean_ratio"] >= 1
