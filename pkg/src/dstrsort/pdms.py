"""Prefix doubling and the prefix-doubling merge sort.

Each string tests prefixes of length l_init, 2*l_init, ... for global
uniqueness of their hash. The first length whose hash is unique
over-approximates the string's distinguishing prefix. Strings are then cut
to that length and sorted with the global input index breaking ties, which
yields the rank of every original string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .bloom import DsbfStats, dsbf_round, hash_prefixes
from .msort import MsConfig, MsResult, ms_sort
from .rquick import atomic_sort_traced, rquick_sort
from .simnet import Machine, allgather, allreduce, prefix_sum
from .strcore import as_strings


class DuplicateStringError(ValueError):
    def __init__(self, a: int, b: int):
        super().__init__(f"input strings {a} and {b} are equal")
        self.pair = (a, b)


def initial_length(p: int, sigma: int = 256) -> int:
    """Smallest power of two >= log2(p)/log2(sigma), at least 4."""
    x = math.log2(max(p, 2)) / math.log2(sigma)
    return max(4, 1 << max(0, math.ceil(math.log2(x))))


def switch_threshold(p: int, k: int) -> int:
    """Below this many active strings, duplicates are found by sorting hashes."""
    return math.ceil(k * k * p ** (1 + 1 / k) * math.ceil(math.log2(p))) if p > 1 else 0


@dataclass(frozen=True)
class PdmsConfig:
    ms: MsConfig = MsConfig()
    m_factor: float = math.e
    sigma: int = 256
    init_len: int | None = None
    threshold: int | None = None
    hash_seed: int | None = None
    on_duplicate: str = "allow"  # or "error"


@dataclass
class RoundStats:
    round: int
    length: int
    active: int
    m: int
    method: str
    flagged: int
    finalized: int


@dataclass
class Doubling:
    lengths: list[list[int]]
    rounds: list[RoundStats] = field(default_factory=list)
    forced: list[list[int]] = field(default_factory=list)  # local indices finalized at full length while flagged
    bloom: DsbfStats = field(default_factory=DsbfStats)
    init_len: int = 4
    sigma: int = 256


def _pairwise_last(a, b):
    return b if b is not None else a


def dedup_by_sorting(machine: Machine, positions: Sequence[np.ndarray],
                     ids: Sequence[Sequence[int]]) -> list[np.ndarray]:
    """Flag positions occurring at least twice, via a global sort of
    (position, index) pairs and a scan over sorted neighbours."""
    p = machine.p
    keys = [np.asarray(x, dtype=np.uint64).tolist() for x in positions]
    with machine.phase("sort"):
        srt, route = atomic_sort_traced(machine, keys, ids)
    with machine.phase("scan"):
        group = [list(range(p))]
        last = [x[-1][0] if x else None for x in srt]
        first = [x[0][0] if x else None for x in srt]
        before = prefix_sum(machine, group, last, _pairwise_last, None)
        after = prefix_sum(machine, group, first, _pairwise_last, None, reverse=True)
    bits: list[dict[int, bool]] = []
    for pe in range(p):
        x = srt[pe]
        out = {}
        for i, (k, _, slot) in enumerate(x):
            prev = x[i - 1][0] if i > 0 else before[pe]
            nxt = x[i + 1][0] if i + 1 < len(x) else after[pe]
            out[slot] = k == prev or k == nxt
        bits.append(out)
    with machine.phase("answer"):
        back = route.send_back(machine, bits)
    return [np.array([back[pe][i] for i in range(len(keys[pe]))], dtype=bool) for pe in range(p)]


def approximate_dist_prefixes(machine: Machine, inputs: Sequence[Any], config: PdmsConfig = PdmsConfig(),
                              ids: Sequence[Sequence[int]] | None = None) -> Doubling:
    p = machine.p
    strings = [as_strings(x) for x in inputs]
    sched = config.ms.resolve(p)
    k = len(sched)
    seed = config.ms.seed if config.hash_seed is None else config.hash_seed
    threshold = switch_threshold(p, k) if config.threshold is None else config.threshold
    ell = config.init_len or initial_length(p, config.sigma)
    everyone = [list(range(p))]
    if ids is None:
        with machine.phase("pd/ids"):
            offs = prefix_sum(machine, everyone, [len(s) for s in strings])
        ids = [list(range(offs[pe], offs[pe] + len(strings[pe]))) for pe in range(p)]
    res = Doubling([[0] * len(s) for s in strings], forced=[[] for _ in range(p)], init_len=ell,
                   sigma=config.sigma)
    active = [list(range(len(s))) for s in strings]
    rnd = 0
    while True:
        with machine.phase(f"pd/r{rnd}"):
            with machine.phase("count"):
                total = allreduce(machine, everyone, [len(a) for a in active], lambda a, b: a + b)[0]
            if total == 0:
                break
            m = max(1, math.ceil(config.m_factor * total))
            pos = [hash_prefixes([strings[pe][i][:ell] for i in active[pe]], m, seed, rnd) for pe in range(p)]
            if total < threshold:
                method = "sort"
                with machine.phase("dedup"):
                    flags = dedup_by_sorting(machine, pos, [[ids[pe][i] for i in active[pe]] for pe in range(p)])
            else:
                method = "bloom"
                with machine.phase("bloom"):
                    flags = dsbf_round(machine, pos, m, sched, res.bloom)
        flagged = finalized = 0
        for pe in range(p):
            keep = []
            S = strings[pe]
            for i, f in zip(active[pe], flags[pe].tolist()):
                L = len(S[i])
                if not f:
                    res.lengths[pe][i] = min(ell, L)
                    finalized += 1
                elif ell >= L:
                    res.lengths[pe][i] = L
                    res.forced[pe].append(i)
                    finalized += 1
                    flagged += 1
                else:
                    keep.append(i)
                    flagged += 1
            active[pe] = keep
        res.rounds.append(RoundStats(rnd, ell, total, m, method, flagged, finalized))
        ell *= 2
        rnd += 1
    if config.on_duplicate == "error":
        _check_duplicates(machine, strings, res, ids)
    return res


def _check_duplicates(machine: Machine, strings, res: Doubling, ids) -> None:
    """Exact check among strings that stayed flagged up to their full length."""
    p = machine.p
    with machine.phase("pd/dupcheck"):
        cand = [[strings[pe][i] for i in res.forced[pe]] for pe in range(p)]
        cid = [[ids[pe][i] for i in res.forced[pe]] for pe in range(p)]
        out = rquick_sort(machine, cand, plus=True, ids=cid)
        last = [(r.strings[-1], r.ids[-1]) if len(r) else None for r in out.runs]
        before = prefix_sum(machine, [list(range(p))], last, _pairwise_last, None)
        found = []
        for pe, r in enumerate(out.runs):
            prev = before[pe]
            for s, i in zip(r.strings, r.ids):
                if prev is not None and prev[0] == s:
                    found.append((prev[1], i))
                    break
                prev = (s, i)
        pairs = allgather(machine, [list(range(p))], [found[:1] if found else [] for _ in range(p)])[0]
    hits = [x for part in pairs for x in part]
    if hits:
        raise DuplicateStringError(*hits[0])


@dataclass
class PdmsResult:
    perm: list[int]
    ms: MsResult
    doubling: Doubling
    lengths: list[list[int]]


def pdms_sort(machine: Machine, inputs: Sequence[Any], config: PdmsConfig = PdmsConfig()) -> PdmsResult:
    """Rank all strings; ``perm[i]`` is the input index of the i-th smallest."""
    p = machine.p
    strings = [as_strings(x) for x in inputs]
    with machine.phase("pd/ids"):
        offs = prefix_sum(machine, [list(range(p))], [len(s) for s in strings])
    ids = [list(range(offs[pe], offs[pe] + len(strings[pe]))) for pe in range(p)]
    dbl = approximate_dist_prefixes(machine, strings, config, ids)
    cut = [[s[:d] for s, d in zip(strings[pe], dbl.lengths[pe])] for pe in range(p)]
    ms = ms_sort(machine, cut, config.ms, ids=ids)
    return PdmsResult(ms.ids(), ms, dbl, dbl.lengths)
