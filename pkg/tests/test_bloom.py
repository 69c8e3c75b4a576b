import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstrsort.bloom import (EF_CONSTANT_BITS, BloomError, DsbfStats, dsbf_round, ef_bound_bits, ef_decode,
                            ef_encode, ef_low_width, exact_duplicates, fp_rate_estimate, hash_prefixes, owner_of)
from dstrsort.simnet import Machine, SimError


def test_ef_empty_batch_is_header_only():
    blk = ef_encode([], 100)
    assert blk.x == 0 and len(ef_decode(blk)) == 0
    assert blk.bits <= EF_CONSTANT_BITS


def test_ef_dense_batch_has_no_low_bits():
    blk = ef_encode([0, 1, 2, 3], 4)
    assert blk.width == 0
    assert ef_decode(blk).tolist() == [0, 1, 2, 3]


def test_ef_random_batch_roundtrip_and_bound():
    rng = np.random.default_rng(0)
    vals = np.sort(rng.choice(2**20, size=10_000, replace=False))
    blk = ef_encode(vals, 2**20)
    assert np.array_equal(ef_decode(blk), vals)
    assert blk.bits <= ef_bound_bits(10_000, 2**20)


@given(st.sets(st.integers(0, 2**40 - 1), max_size=200), st.integers(0, 2**20))
@settings(max_examples=300)
def test_ef_roundtrip_property(vals, extra):
    vals = sorted(vals)
    u = (vals[-1] + 1 if vals else 1) + extra
    blk = ef_encode(vals, u)
    assert ef_decode(blk.data).tolist() == vals
    assert blk.bits <= ef_bound_bits(len(vals), u)
    assert blk.width == (max(0, int(math.floor(math.log2(u / len(vals))))) if vals else 0)


def test_ef_low_width_examples():
    assert ef_low_width(4, 4) == 0
    assert ef_low_width(1, 1024) == 10
    assert ef_low_width(3, 1024) == 8


@pytest.mark.parametrize("vals,u", [([3, 1], 10), ([1, 1], 10), ([5], 5)])
def test_ef_rejects_bad_batches(vals, u):
    with pytest.raises(BloomError):
        ef_encode(vals, u)


def test_hash_is_keyed_and_in_range():
    xs = [bytes([i % 7, i // 7 + 1]) for i in range(1000)]
    a = hash_prefixes(xs, 997, seed=1, rnd=0)
    assert a.max() < 997
    assert np.array_equal(a, hash_prefixes(xs, 997, seed=1, rnd=0))
    assert not np.array_equal(a, hash_prefixes(xs, 997, seed=2, rnd=0))
    assert not np.array_equal(a, hash_prefixes(xs, 997, seed=1, rnd=1))
    with pytest.raises(BloomError):
        hash_prefixes(xs, 0, 1)


def test_owner_mapping():
    pos = np.arange(100, dtype=np.uint64)
    own = owner_of(pos, 4, 100)
    assert own.tolist() == [x * 4 // 100 for x in range(100)]


def test_true_duplicate_on_two_pes():
    m = 64
    pos = [np.array([5, 9], dtype=np.uint64), np.array([9, 11], dtype=np.uint64)]
    got = dsbf_round(Machine(2), pos, m, [2])
    assert got[0].tolist() == [False, True] and got[1].tolist() == [True, False]


def test_distinct_hashes_are_unique():
    n = 400
    items = [i.to_bytes(4, "little") for i in range(n)]
    pos = hash_prefixes(items, 100 * n, seed=3)
    # keep only values that really are distinct
    _, first = np.unique(pos, return_index=True)
    pos = pos[np.sort(first)]
    parts = np.array_split(pos, 4)
    flags = dsbf_round(Machine(4), parts, 100 * n, [2, 2])
    assert not any(f.any() for f in flags)


@pytest.mark.parametrize("dims", [[8], [2, 4], [4, 2], [2, 2, 2]])
def test_levels_agree_with_reference(dims):
    rng = np.random.default_rng(len(dims))
    m = 300
    pos = [rng.integers(0, m, size=rng.integers(0, 120)).astype(np.uint64) for _ in range(8)]
    stats = DsbfStats()
    got = dsbf_round(Machine(8), pos, m, dims, stats)
    want = exact_duplicates(pos)
    assert all(np.array_equal(a, b) for a, b in zip(got, want))
    assert stats.ascending
    assert all(bits <= ef_bound_bits(x, u) for x, u, bits in stats.batches)
    assert len(stats.hop_loads) == len(dims)


def test_same_pe_repeat_counts_as_duplicate():
    got = dsbf_round(Machine(2), [np.array([4, 4], dtype=np.uint64), np.array([], dtype=np.uint64)], 16, [2])
    assert got[0].tolist() == [True, True]


def test_round_trip_message_structure():
    p, m = 16, 5000
    rng = np.random.default_rng(2)
    pos = [rng.integers(0, m, size=200).astype(np.uint64) for _ in range(p)]
    mach = Machine(p)
    dsbf_round(mach, pos, m, [4, 4])
    st_ = mach.ledger.stats("main")
    assert st_.supersteps == 4  # two hops out, two back
    assert st_.max_step_sends <= 3


def test_rejects_bad_input():
    with pytest.raises(BloomError):
        dsbf_round(Machine(2), [np.array([10], dtype=np.uint64), np.array([], dtype=np.uint64)], 10, [2])
    with pytest.raises(SimError):
        dsbf_round(Machine(4), [np.array([], dtype=np.uint64)] * 4, 10, [3])


def test_fp_rate_small_cases():
    assert fp_rate_estimate(1, 1, seeds=[0, 1]) == 0.0
    rate = fp_rate_estimate(2000, math.ceil(math.e * 2000), seeds=range(5))
    analytic = 1 - ((math.ceil(math.e * 2000) - 1) / math.ceil(math.e * 2000)) ** 1999
    assert abs(rate - analytic) < 0.05
