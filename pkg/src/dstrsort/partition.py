"""Regular sampling, splitter selection, bucket formation and the two
bucket-to-PE assignment strategies."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from typing import Sequence

from .rquick import rquick_sort
from .simnet import Envelope, Machine, allgather, allreduce, prefix_sum, vector_add
from .strcore import SortedRun, bucket_bounds


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    mode: str = "string"  # "string" or "character"
    factor: int | None = None  # v; None means 2*k*r

    def __post_init__(self):
        if self.mode not in ("string", "character"):
            raise PartitionError(f"unknown sampling mode {self.mode!r}")
        if self.factor is not None and self.factor < 1:
            raise PartitionError("sampling factor must be >= 1")

    def v(self, k: int, r: int) -> int:
        return self.factor if self.factor is not None else 2 * k * r


def factorize(p: int) -> list[int]:
    out, q = [], 2
    while q * q <= p:
        while p % q == 0:
            out.append(q)
            p //= q
        q += 1
    if p > 1:
        out.append(p)
    return out


def default_schedule(p: int, k: int) -> tuple[int, ...]:
    """k split factors with product p, as equal as possible, largest first."""
    if k < 1:
        raise PartitionError("k must be >= 1")
    factors = [1] * k
    for q in sorted(factorize(p), reverse=True):
        i = min(range(k), key=lambda j: (factors[j], j))
        factors[i] *= q
    return tuple(sorted(factors, reverse=True))


def parse_schedule(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise PartitionError(f"bad schedule {text!r}") from None
    if not out or any(x < 1 for x in out):
        raise PartitionError(f"bad schedule {text!r}")
    return out


# ---------------------------------------------------------------------------
# sampling


def sample_counts(sizes: Sequence[int], v: int) -> list[int]:
    """Samples per PE so that the group draws exactly len(sizes)*(v+1).

    PE i takes ceil(size_i/w) - 1 with w = ceil(total / (p'(v+1)));
    the remainder is topped up round-robin over nonempty PEs in order.
    """
    want = len(sizes) * (v + 1)
    total = sum(sizes)
    if total == 0:
        return [0] * len(sizes)
    w = -(-total // want)
    counts = [max(-(-s // w) - 1, 0) for s in sizes]
    deficit = want - sum(counts)
    nonempty = [i for i, s in enumerate(sizes) if s > 0]
    q, rem = divmod(deficit, len(nonempty))
    for rank, i in enumerate(nonempty):
        counts[i] += q + (rank < rem)
    return counts


def even_positions(n: int, c: int) -> list[int]:
    """c positions in [0, n) with at most ceil(n/(c+1)) items per gap."""
    return [max((j + 1) * n // (c + 1) - 1, 0) for j in range(c)]


def string_samples(run: SortedRun, count: int) -> list[bytes]:
    S = run.strings
    return [S[i] for i in even_positions(len(S), count)] if S else []


def _tag(index: int, width: int) -> bytes:
    out = bytearray()
    for _ in range(width):
        index, d = divmod(index, 255)
        out.append(d + 1)
    return bytes(reversed(out))


def char_samples(run: SortedRun, count: int) -> list[bytes]:
    """Samples at evenly spaced character positions, each moved back to the
    start of its string. A string picked more than once gets the sample's
    local index appended (fixed-width base-255 digits 1..255)."""
    S = run.strings
    if not S or count == 0:
        return []
    starts = [0] + list(accumulate(map(len, S)))
    picks = [bisect_right(starts, x) - 1 for x in even_positions(starts[-1], count)]
    width = 1
    while 255 ** width < count:
        width += 1
    out = []
    for j, i in enumerate(picks):
        repeated = (j > 0 and picks[j - 1] == i) or (j + 1 < len(picks) and picks[j + 1] == i)
        out.append(S[i] + _tag(j, width) if repeated else S[i])
    return out


def draw_samples_string(runs: Sequence[SortedRun], v: int) -> list[list[bytes]]:
    counts = sample_counts([len(r) for r in runs], v)
    return [string_samples(r, c) for r, c in zip(runs, counts)]


def draw_samples_character(runs: Sequence[SortedRun], v: int) -> list[list[bytes]]:
    counts = sample_counts([r.total_chars for r in runs], v)
    return [char_samples(r, c) for r, c in zip(runs, counts)]


# ---------------------------------------------------------------------------
# splitters and buckets


def select_splitters(sorted_samples: Sequence[bytes], r: int) -> list[bytes]:
    """f_j = V[j*|V|/r - 1] for j = 1..r-1."""
    V = sorted_samples
    if r <= 1:
        return []
    if not V:
        return [b""] * (r - 1)
    if len(V) < r:
        raise PartitionError(f"{len(V)} samples cannot define {r} buckets")
    return [V[j * len(V) // r - 1] for j in range(1, r)]


def compute_splitters(machine: Machine, groups, samples: Sequence[list[bytes]], r: int,
                      plus: bool = True) -> list[list[bytes] | None]:
    """Sort samples per group with hypercube quicksort, pick every |V|/r-th,
    and allgather the picks so all group members agree."""
    gs = [list(g) for g in groups]
    p = machine.p
    if r <= 1:
        return [[] if any(pe in g for g in gs) else None for pe in range(p)]
    with machine.phase("splitters"):
        res = rquick_sort(machine, samples, plus=plus, groups=gs)
        sizes = [len(res.runs[pe]) if res.runs[pe] is not None else 0 for pe in range(p)]
        offs = prefix_sum(machine, gs, sizes)
        totals = allreduce(machine, gs, sizes, lambda a, b: a + b)
        picks: list[list[tuple[int, bytes]] | None] = [None] * p
        for g in gs:
            for pe in g:
                V, n = res.runs[pe].strings, totals[pe]
                if 0 < n < r:
                    raise PartitionError(f"{n} samples cannot define {r} buckets")
                mine = []
                for j in range(1, r):
                    pos = j * n // r - 1 - offs[pe]
                    if 0 <= pos < len(V):
                        mine.append((j, V[pos]))
                picks[pe] = mine
        gathered = allgather(machine, gs, picks)
    out: list[list[bytes] | None] = [None] * p
    for g in gs:
        for pe in g:
            found = dict(x for part in gathered[pe] for x in part)
            out[pe] = [found[j] for j in range(1, r)] if found else [b""] * (r - 1)
    return out


def make_buckets(run: SortedRun, splitters: Sequence[bytes]) -> list[int]:
    """Bucket start indices (length r+1): bucket j is [b[j], b[j+1]) with
    f_j < s <= f_{j+1}."""
    return bucket_bounds(run.strings, splitters)


# ---------------------------------------------------------------------------
# assignment


def grid_assignment(j: int, i: int, group_size: int, r: int) -> int:
    """Local destination of bucket j from local PE i: row i mod p'' of subgroup j."""
    sub = group_size // r
    return j * sub + (i % sub)


@dataclass
class PlanEntry:
    dst: int
    lo: int
    hi: int


def grid_plan(gs: Sequence[Sequence[int]], bounds: Sequence[list[int] | None], r: int) -> list[list[PlanEntry]]:
    plans: list[list[PlanEntry]] = [[] for _ in bounds]
    for g in gs:
        for i, pe in enumerate(g):
            b = bounds[pe]
            plans[pe] = [PlanEntry(g[grid_assignment(j, i, len(g), r)], b[j], b[j + 1]) for j in range(r)]
    return plans


def bounded_plan(machine: Machine, gs: Sequence[Sequence[int]], runs: Sequence[SortedRun | None],
                 bounds: Sequence[list[int] | None], r: int, mode: str) -> list[list[PlanEntry]]:
    """Small/large bucket assignment with O(r) messages per PE.

    Units are strings (mode "string") or characters (mode "character").
    A bucket with at most T_j/(2 r p'') units is small; the t-th small
    bucket of subgroup j goes to its PE floor(t/r). Large buckets fill the
    remaining capacity ceil(T_j/p'') of each receiver in prefix-sum order;
    in character mode a string goes to the receiver owning its first
    character.
    """
    p = machine.p
    gs = [list(g) for g in gs]
    units: list[list[int] | None] = [None] * p
    lens: list[list[int] | None] = [None] * p  # char offsets inside each bucket
    for g in gs:
        for pe in g:
            b, S = bounds[pe], runs[pe].strings
            if mode == "string":
                units[pe] = [b[j + 1] - b[j] for j in range(r)]
            else:
                u = []
                for j in range(r):
                    u.append(sum(map(len, S[b[j]:b[j + 1]])))
                units[pe] = u
    totals = allreduce(machine, gs, units, vector_add)
    info: dict[int, tuple] = {}
    flags: list[list[int] | None] = [None] * p
    for g in gs:
        sub = len(g) // r
        for pe in g:
            T = totals[pe]
            small = [0 < units[pe][j] and 2 * r * sub * units[pe][j] <= T[j] for j in range(r)]
            info[pe] = (small,)
            flags[pe] = [int(x) for x in small] + [0 if s else units[pe][j] for j, s in enumerate(small)]
    offs = prefix_sum(machine, gs, flags, vector_add, [0] * (2 * r))

    # small bucket sizes to their receivers
    msgs = []
    for g in gs:
        sub = len(g) // r
        for pe in g:
            (small,) = info[pe]
            for j in range(r):
                if small[j]:
                    q = offs[pe][j] // r
                    msgs.append((pe, g[j * sub + q], units[pe][j]))
    boxes = machine.send_all(msgs)
    residual: list[int | None] = [None] * p
    for g in gs:
        sub = len(g) // r
        for li, pe in enumerate(g):
            j = li // sub
            cap = -(-totals[pe][j] // sub)
            residual[pe] = cap - sum(e.payload for e in boxes[pe])
    subgroups = [g[j * (len(g) // r):(j + 1) * (len(g) // r)] for g in gs for j in range(r)]
    res_all = allgather(machine, subgroups, residual)

    # large bucket descriptions to PE floor(i/r) of subgroup j, which answers with pieces
    msgs = []
    for g in gs:
        sub = len(g) // r
        for li, pe in enumerate(g):
            (small,) = info[pe]
            for j in range(r):
                if units[pe][j] and not small[j]:
                    msgs.append((pe, g[j * sub + li // r], (j, offs[pe][r + j], units[pe][j])))
    boxes = machine.send_all(msgs)
    replies = []
    for g in gs:
        sub = len(g) // r
        for li, pe in enumerate(g):
            if not boxes[pe]:
                continue
            res = res_all[pe]
            starts = [0] + list(accumulate(res))
            base = g[(li // sub) * sub]
            for e in boxes[pe]:
                _, lo, n = e.payload
                pieces = []
                for q in range(sub):
                    a, b = max(lo, starts[q]), min(lo + n, starts[q + 1])
                    if a < b:
                        pieces.append((base + q, a - lo, b - lo))
                replies.append((pe, e.src, (e.payload[0], pieces)))
    boxes = machine.send_all(replies)

    plans: list[list[PlanEntry]] = [[] for _ in range(p)]
    for g in gs:
        sub = len(g) // r
        for pe in g:
            (small,) = info[pe]
            b, S = bounds[pe], runs[pe].strings
            large = {e.payload[0]: e.payload[1] for e in boxes[pe]}
            for j in range(r):
                if not units[pe][j]:
                    continue
                if small[j]:
                    plans[pe].append(PlanEntry(g[j * sub + offs[pe][j] // r], b[j], b[j + 1]))
                    continue
                pieces = large[j]
                if mode == "string":
                    for dst, a, c in pieces:
                        plans[pe].append(PlanEntry(dst, b[j] + a, b[j] + c))
                else:
                    piece_starts = [a for _, a, _ in pieces]
                    owner = []
                    off = 0
                    for s in S[b[j]:b[j + 1]]:
                        owner.append(bisect_right(piece_starts, off) - 1)
                        off += len(s)
                    k = 0
                    while k < len(owner):
                        m = k
                        while m < len(owner) and owner[m] == owner[k]:
                            m += 1
                        plans[pe].append(PlanEntry(pieces[owner[k]][0], b[j] + k, b[j] + m))
                        k = m
    return plans


def string_bucket_bound(n: int, rs: Sequence[int], vs: Sequence[int], k: int) -> float:
    """String bound on any bucket after levels rs[0..t-1], including the
    (1+1/k) per-level factor of the ceiling generalization."""
    out = float(n)
    for r, v in zip(rs, vs):
        out *= (1 + r / v) * (1 + 1 / k) / r
    return out


def char_bucket_bound(N: int, p: int, rs: Sequence[int], vs: Sequence[int], lmax: int) -> float:
    """Character bound on any bucket after levels rs[0..t-1].

    For a uniform schedule this is
    (1+r/v)^t (N/r^t + t (1+(v+1)/r) (p/r^(t-1)) lmax).
    """
    t = len(rs)
    growth = math.prod(1 + r / v for r, v in zip(rs, vs))
    r, v = rs[-1], vs[-1]
    group = p // math.prod(rs[:-1])
    return growth * (N / math.prod(rs) + t * (1 + (v + 1) / r) * group * lmax)
