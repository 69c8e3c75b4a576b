"""Multi-level distributed string merge sort.

Each level splits every PE group into r subgroups: sample, sort the
samples, pick r-1 splitters, cut the local run into buckets, ship bucket j
to subgroup j, and merge what arrives with an LCP loser tree. After the
last level every group is a single PE and the concatenation over PEs is
sorted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from .partition import (PartitionError, SamplingConfig, bounded_plan, char_samples, compute_splitters,
                        default_schedule, grid_plan, string_bucket_bound, char_bucket_bound, make_buckets, sample_counts,
                        string_samples)
from .simnet import Envelope, Machine, allgather, vector_add
from .strcore import SortedRun, as_strings, decode_run, encode_run, local_sort, losertree_merge


@dataclass(frozen=True)
class MsConfig:
    levels: int = 1
    schedule: tuple[int, ...] | None = None
    sampling: SamplingConfig = SamplingConfig()
    assignment: str = "grid"  # or "bounded"
    lcp_compression: bool = False
    local_sorter: str = "mkqs"
    seed: int = 0

    def resolve(self, p: int) -> tuple[int, ...]:
        sched = tuple(self.schedule) if self.schedule else default_schedule(p, self.levels)
        if math.prod(sched) != p:
            raise PartitionError(f"schedule {sched} does not multiply to p={p}")
        if self.assignment not in ("grid", "bounded"):
            raise PartitionError(f"unknown assignment {self.assignment!r}")
        return sched


@dataclass
class LevelStats:
    level: int
    r: int
    v: int
    group_size: int
    bucket_strings: list[int]  # |B^j| for every (group, j)
    bucket_chars: list[int]
    pe_strings: list[int]  # after the exchange
    pe_chars: list[int]
    sends: list[int]
    recvs: list[int]
    bytes_exchanged: int
    overshoot_chars: int = 0  # max over receivers of chars beyond ceil(|B^j|/p'')

    @property
    def max_bucket_strings(self) -> int:
        return max(self.bucket_strings, default=0)

    @property
    def max_bucket_chars(self) -> int:
        return max(self.bucket_chars, default=0)


@dataclass
class MsResult:
    runs: list[SortedRun]
    schedule: tuple[int, ...]
    levels: list[LevelStats] = field(default_factory=list)
    n: int = 0
    total_chars: int = 0
    max_len: int = 0
    config: MsConfig | None = None

    def strings(self) -> list[bytes]:
        return [s for r in self.runs for s in r.strings]

    def ids(self) -> list[int]:
        return [i for r in self.runs for i in r.ids]


def _exchange(machine: Machine, plans, runs, compress: bool, with_ids: bool) -> list[list[SortedRun]]:
    p = machine.p
    out: list[list[Envelope]] = [[] for _ in range(p)]
    for pe in range(p):
        run = runs[pe]
        for e in plans[pe]:
            piece = run.slice(e.lo, e.hi)
            data = encode_run(piece, compress=compress, with_ids=with_ids)
            out[pe].append(Envelope(pe, e.dst, data))
    boxes = machine.superstep(out)
    return [[decode_run(e.payload) for e in boxes[pe]] for pe in range(p)]


def ms_sort(machine: Machine, inputs: Sequence[Any], config: MsConfig = MsConfig(),
            ids: Sequence[Sequence[int]] | None = None, on_level=None) -> MsResult:
    """Sort strings spread over the machine's PEs.

    ``inputs[pe]`` is a StringArena, a list of strings or a SortedRun. With
    ``ids`` every string carries an id that travels along and orders equal
    strings; the result's runs then hold ids too. ``on_level(t, runs,
    groups)`` sees the merged runs and the new PE groups after level t.
    """
    p = machine.p
    sched = config.resolve(p)
    k = len(sched)
    with_ids = ids is not None
    with machine.phase("init"):
        runs: list[SortedRun] = []
        for pe in range(p):
            x = inputs[pe]
            if isinstance(x, SortedRun) and (x.ids is not None) == with_ids:
                runs.append(x)
                continue
            run = local_sort(as_strings(x), ids[pe] if with_ids else None, method=config.local_sorter)
            runs.append(run if with_ids else run.without_ids())
    all_chars = [r.total_chars for r in runs]
    result = MsResult(runs, sched, n=sum(map(len, runs)), total_chars=sum(all_chars),
                      max_len=max((len(s) for r in runs for s in r.strings), default=0), config=config)

    groups = [list(range(p))]
    for t, r in enumerate(sched, start=1):
        v = config.sampling.v(k, r)
        mode = config.sampling.mode
        gsize = len(groups[0])
        sub = gsize // r
        with machine.phase(f"L{t}"):
            with machine.phase("samples"):
                key = [len(runs[pe]) if mode == "string" else runs[pe].total_chars for pe in range(p)]
                sizes = allgather(machine, groups, key)
            samples: list[list[bytes]] = [[] for _ in range(p)]
            for g in groups:
                for pe in g:
                    c = sample_counts(sizes[pe], v)[g.index(pe)]
                    samples[pe] = (string_samples if mode == "string" else char_samples)(runs[pe], c)
            if r > 1:
                splitters = compute_splitters(machine, groups, samples, r)
            else:
                splitters = [[] for _ in range(p)]
            bounds = [make_buckets(runs[pe], splitters[pe]) for pe in range(p)]
            with machine.phase("assign"):
                if config.assignment == "grid":
                    plans = grid_plan(groups, bounds, r)
                else:
                    plans = bounded_plan(machine, groups, runs, bounds, r, mode)
            # bucket totals (bookkeeping only, not charged to the ledger)
            b_str, b_chr = [], []
            for g in groups:
                cnt = [0] * r
                chr_ = [0] * r
                for pe in g:
                    b, S = bounds[pe], runs[pe].strings
                    for j in range(r):
                        cnt[j] += b[j + 1] - b[j]
                        chr_[j] += sum(map(len, S[b[j]:b[j + 1]]))
                b_str += cnt
                b_chr += chr_
            with machine.phase("exchange"):
                got = _exchange(machine, plans, runs, config.lcp_compression, with_ids)
                st = machine.ledger.stats(machine.phase_name)
            runs = [losertree_merge(got[pe], tie="ids" if with_ids else "run") if got[pe]
                    else SortedRun.empty(with_ids) for pe in range(p)]
            if not with_ids:
                runs = [x.without_ids() if x.ids is not None else x for x in runs]
        pe_chars = [x.total_chars for x in runs]
        over = 0
        for gi, g in enumerate(groups):
            for j in range(r):
                share = -(-b_chr[gi * r + j] // sub)
                for pe in g[j * sub:(j + 1) * sub]:
                    over = max(over, pe_chars[pe] - share)
        result.levels.append(LevelStats(
            t, r, v, gsize, b_str, b_chr, [len(x) for x in runs], pe_chars,
            list(st.msgs_sent), list(st.msgs_received), sum(st.bytes_sent), over))
        groups = [g[j * sub:(j + 1) * sub] for g in groups for j in range(r)]
        if on_level is not None:
            on_level(t, runs, groups)
    result.runs = runs
    return result


@dataclass
class LevelReport:
    level: int
    max_bucket_strings: int
    bound_bucket_strings: float
    max_bucket_chars: int
    bound_bucket_chars: float
    max_pe_strings: int
    max_pe_chars: int
    bound_pe_chars: float


def level_balance_report(result: MsResult) -> list[LevelReport]:
    """Observed per-level maxima against the sampling bounds for the run's
    r, v and level. The per-PE character bound is the bucket bound spread
    over the subgroup plus one longest string."""
    out = []
    p = sum(1 for _ in result.runs)
    k = len(result.schedule)
    rs, vs = [], []
    for st in result.levels:
        rs.append(st.r)
        vs.append(st.v)
        b1 = string_bucket_bound(result.n, rs, vs, k)
        b3 = char_bucket_bound(result.total_chars, p, rs, vs, result.max_len)
        sub = st.group_size // st.r
        out.append(LevelReport(st.level, st.max_bucket_strings, b1, st.max_bucket_chars, b3,
                               max(st.pe_strings, default=0), max(st.pe_chars, default=0),
                               b3 / sub + result.max_len))
    return out
