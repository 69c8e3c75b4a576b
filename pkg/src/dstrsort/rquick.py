"""Hypercube quicksort for strings (plain and LCP-aware) and for fixed-width
(key, index) pairs with route tracing."""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Sequence

from .simnet import Envelope, Machine, allgather, prefix_sum
from .strcore import SortedRun, as_strings, lcp, lcp_array, local_sort, losertree_merge


def cube_dim(size: int) -> int:
    return size.bit_length() - 1


def lower_median(keys: list) -> Any:
    """Median of the gathered local medians; None entries (empty PEs) abstain."""
    ks = sorted(k for k in keys if k is not None)
    if not ks:
        return None
    return ks[(len(ks) - 1) // 2]


def pivot_select(machine: Machine, subcubes, medians: Sequence[Any]) -> list[Any]:
    """Allgather local medians inside each subcube and pick the lower median."""
    gathered = allgather(machine, subcubes, medians)
    return [None if g is None else lower_median(g) for g in gathered]


# ---------------------------------------------------------------------------
# element handlers


class _PlainOps:
    """Elements are (string, id) tuples kept in Python lists."""

    def item_bytes(self, items) -> int:
        return 4 + sum(12 + len(x[0]) for x in items)

    nbytes = item_bytes

    def sort(self, items):
        return sorted(items)

    def size(self, c) -> int:
        return len(c)

    def median(self, c):
        return c[(len(c) - 1) // 2] if c else None

    def split(self, c, pivot):
        if pivot is None:
            return c, c[:0]
        k = bisect_right(c, pivot)
        return c[:k], c[k:]

    def merge(self, a, b):
        return list(heapq.merge(a, b))

    def slice(self, c, lo, hi):
        return c[lo:hi]

    def concat(self, parts):
        out = []
        for x in parts:
            out.extend(x)
        return out

    def finish(self, c) -> SortedRun:
        strings = [s for s, _ in c]
        return SortedRun(strings, lcp_array(strings), [i for _, i in c])


class _PlusOps(_PlainOps):
    """Sorted containers are SortedRuns with ids; LCPs travel with strings."""

    def sort(self, items):
        return local_sort([s for s, _ in items], [i for _, i in items])

    def nbytes(self, c: SortedRun) -> int:
        return 5 + sum(16 + len(s) for s in c.strings)

    def size(self, c) -> int:
        return len(c)

    def median(self, c: SortedRun):
        if not len(c):
            return None
        m = (len(c) - 1) // 2
        return (c.strings[m], c.ids[m])

    def split(self, c: SortedRun, pivot):
        if pivot is None:
            return c, SortedRun.empty(True)
        S, I = c.strings, c.ids
        k = bisect_right(range(len(S)), pivot, key=lambda i: (S[i], I[i]))
        return c.slice(0, k), c.slice(k, len(S))

    def merge(self, a, b):
        return losertree_merge([a, b], tie="ids")

    def slice(self, c, lo, hi):
        return c.slice(lo, hi)

    def concat(self, parts):
        strings, lc, ids = [], [], []
        for part in parts:
            if not len(part):
                continue
            if strings:
                first = lcp(strings[-1], part.strings[0])
                lc.extend([first] + part.lcp[1:])
            else:
                lc.extend(part.lcp)
            strings.extend(part.strings)
            ids.extend(part.ids)
        return SortedRun(strings, lc, ids)

    def finish(self, c) -> SortedRun:
        return c


class _AtomicOps(_PlainOps):
    """Elements are (key, index, slot) with fixed 16-byte wire size."""

    def item_bytes(self, items) -> int:
        return 16 * len(items)

    nbytes = item_bytes

    def median(self, c):
        if not c:
            return None
        k, i, _ = c[(len(c) - 1) // 2]
        return (k, i)

    def split(self, c, pivot):
        if pivot is None:
            return c, c[:0]
        k = bisect_right(c, (pivot[0], pivot[1], float("inf")))
        return c[:k], c[k:]

    def finish(self, c):
        return c


# ---------------------------------------------------------------------------
# route tracing


class Route:
    """Per-step tables mapping (pe, slot) to where the element came from.

    Elements are (key, index, slot); every move assigns a fresh slot at
    the receiver and records (previous pe, previous slot).
    """

    def __init__(self, p: int):
        self.p = p
        self.tables: list[list[list[tuple[int, int]]]] = []
        self._next: list[list[tuple[int, int]]] | None = None

    def begin(self) -> None:
        self._next = [[] for _ in range(self.p)]

    def relabel(self, pe: int, src: int, items: list) -> list:
        tab = self._next[pe]
        base = len(tab)
        tab.extend((src, slot) for _, _, slot in items)
        return [(k, i, base + n) for n, (k, i, _) in enumerate(items)]

    def end(self) -> None:
        self.tables.append(self._next)
        self._next = None

    def send_back(self, machine: Machine, bits: list[dict[int, bool]]) -> list[dict[int, bool]]:
        """Carry one bit per element back to its starting slot; one superstep per step."""
        cur = bits
        for tab in reversed(self.tables):
            prev: list[dict[int, bool]] = [dict() for _ in range(self.p)]
            out: list[list[Envelope]] = [[] for _ in range(self.p)]
            for pe in range(self.p):
                by_src: dict[int, list[tuple[int, bool]]] = {}
                for slot, (src, old) in enumerate(tab[pe]):
                    b = cur[pe].get(slot, False)
                    if src == pe:
                        prev[pe][old] = b
                    else:
                        by_src.setdefault(src, []).append((old, b))
                for src in sorted(by_src):
                    pairs = by_src[src]
                    out[pe].append(Envelope(pe, src, pairs, nbytes=(len(pairs) + 7) // 8))
            for pe, box in enumerate(machine.superstep(out)):
                for e in box:
                    for old, b in e.payload:
                        prev[pe][old] = b
            cur = prev
        return cur


# ---------------------------------------------------------------------------
# engine


def _move(machine: Machine, ops, sends: list[list[tuple[int, Any]]], route: Route | None,
          unsorted: bool) -> list[list[tuple[int, Any]]]:
    """One superstep moving containers. sends[pe] = [(dst, container)], may include pe itself.

    Returns received (src, container) pairs per PE in src order.
    """
    p = machine.p
    out: list[list[Envelope]] = [[] for _ in range(p)]
    local: list[list[tuple[int, Any]]] = [[] for _ in range(p)]
    for pe in range(p):
        for dst, c in sends[pe]:
            if dst == pe:
                local[pe].append((pe, c))
            elif ops.size(c):
                nb = ops.item_bytes(c) if unsorted else ops.nbytes(c)
                out[pe].append(Envelope(pe, dst, c, nbytes=nb))
    boxes = machine.superstep(out)
    recv: list[list[tuple[int, Any]]] = []
    if route is not None:
        route.begin()
    for pe in range(p):
        got = local[pe] + [(e.src, e.payload) for e in boxes[pe]]
        got.sort(key=lambda x: x[0])
        if route is not None:
            got = [(src, route.relabel(pe, src, c)) for src, c in got]
        recv.append(got)
    if route is not None:
        route.end()
    return recv


def _hypercube(machine: Machine, gs: list[list[int]], items: list[list], ops,
               route: Route | None, tag: str, on_round=None) -> tuple[list[Any], list[int]]:
    """Fold, shuffle, sort locally, then split along cube dimensions.

    ``items`` holds unsorted element tuples per PE. Returns sorted
    containers per PE (empty on folded-out PEs) and post-shuffle counts.
    """
    p = machine.p
    rank_of = {pe: (g, r) for g in gs for r, pe in enumerate(g)}
    members = [pe for g in gs for pe in g]
    dims = {id(g): cube_dim(len(g)) for g in gs}

    # fold PEs beyond the largest power of two into the cube
    if any(len(g) != 1 << dims[id(g)] for g in gs):
        with machine.phase("fold"):
            sends = [[] for _ in range(p)]
            for pe in members:
                g, r = rank_of[pe]
                cut = 1 << dims[id(g)]
                sends[pe].append((g[r - cut] if r >= cut else pe, items[pe]))
            recv = _move(machine, ops, sends, route, True)
            items = [sum((c for _, c in recv[pe]), []) for pe in range(p)]

    # random shuffle inside the cube
    with machine.phase("shuffle"):
        sends = [[] for _ in range(p)]
        for pe in members:
            g, r = rank_of[pe]
            size = 1 << dims[id(g)]
            if r >= size:
                continue
            rng = machine.rng(pe, f"{tag}/shuffle")
            buckets: list[list] = [[] for _ in range(size)]
            for x in items[pe]:
                buckets[rng.randrange(size)].append(x)
            for q in range(size):
                if buckets[q]:
                    sends[pe].append((g[q], buckets[q]))
        recv = _move(machine, ops, sends, route, True)
        items = [sum((c for _, c in recv[pe]), []) for pe in range(p)]
    shuffle_counts = [len(items[pe]) for pe in range(p)]

    cont: list[Any] = [ops.sort(items[pe]) for pe in range(p)]

    dmax = max(dims.values(), default=0)
    for j in range(dmax - 1, -1, -1):
        with machine.phase(f"round{dmax - 1 - j}"):
            subcubes = []
            for g in gs:
                d = dims[id(g)]
                if j >= d:
                    continue
                for base in range(0, 1 << d, 1 << (j + 1)):
                    subcubes.append(g[base:base + (1 << (j + 1))])
            if not subcubes:
                continue
            active = [pe for sc in subcubes for pe in sc]
            meds: list[Any] = [None] * p
            for pe in active:
                meds[pe] = ops.median(cont[pe])
            pivots = pivot_select(machine, subcubes, meds)
            sends = [[] for _ in range(p)]
            for sc in subcubes:
                half = len(sc) // 2
                for r, pe in enumerate(sc):
                    low, high = ops.split(cont[pe], pivots[pe])
                    partner = sc[r ^ half]
                    if r < half:
                        sends[pe] += [(pe, low), (partner, high)]
                    else:
                        sends[pe] += [(partner, low), (pe, high)]
            recv = _move(machine, ops, sends, route, False)
            for pe in active:
                parts = [c for _, c in recv[pe]]
                cont[pe] = ops.merge(parts[0], parts[1]) if len(parts) == 2 else (
                    parts[0] if parts else ops.sort([]))
            if on_round is not None:
                on_round(dmax - 1 - j, {pe: ops.finish(cont[pe]) for pe in active})
    return cont, shuffle_counts


def _redistribute(machine: Machine, gs: list[list[int]], cont: list[Any], ops) -> list[Any]:
    """Spread each non-power-of-two group's output evenly over all its PEs."""
    uneven = [g for g in gs if len(g) & (len(g) - 1)]
    if not uneven:
        return cont
    with machine.phase("redistribute"):
        counts = [0] * machine.p
        for g in uneven:
            for pe in g:
                counts[pe] = ops.size(cont[pe])
        allc = allgather(machine, uneven, counts)
        sends = [[] for _ in range(machine.p)]
        for g in uneven:
            P = len(g)
            cs = allc[g[0]]
            n = sum(cs)
            starts = [r * n // P for r in range(P + 1)]
            off = 0
            for r, pe in enumerate(g):
                lo, hi = off, off + cs[r]
                for q in range(P):
                    a, b = max(lo, starts[q]), min(hi, starts[q + 1])
                    if a < b:
                        sends[pe].append((g[q], ops.slice(cont[pe], a - lo, b - lo)))
                off = hi
        recv = _move(machine, ops, sends, None, False)
        out = list(cont)
        for g in uneven:
            for pe in g:
                out[pe] = ops.concat([c for _, c in recv[pe]])
    return out


@dataclass
class RquickResult:
    runs: list[SortedRun | None]
    shuffle_counts: list[int] = field(default_factory=list)


def global_ids(machine: Machine, gs, sizes: Sequence[int]) -> list[int]:
    """Exclusive prefix sum of per-PE sizes inside each group."""
    return prefix_sum(machine, gs, list(sizes))


def rquick_sort(machine: Machine, runs: Sequence[Any], plus: bool = True, groups=None,
                ids: Sequence[Sequence[int]] | None = None, on_round=None) -> RquickResult:
    """Sort the union of ``runs`` inside every group.

    Equal strings are ordered by id; ids default to global input
    positions (group order). Output runs carry the ids and, for groups
    whose size is not a power of two, are rebalanced to within one string.
    ``on_round(i, {pe: SortedRun})`` is called after every cube round.
    """
    p = machine.p
    gs = [list(range(p))] if groups is None else [list(g) for g in groups]
    in_group = {pe for g in gs for pe in g}
    strings = [as_strings(runs[pe]) if pe in in_group else [] for pe in range(p)]
    ops = _PlusOps() if plus else _PlainOps()
    with machine.phase("rquick+" if plus else "rquick"):
        if ids is None:
            with machine.phase("ids"):
                offs = global_ids(machine, gs, [len(s) for s in strings])
            ids = [list(range(offs[pe], offs[pe] + len(strings[pe]))) if offs[pe] is not None else []
                   for pe in range(p)]
        items = [list(zip(strings[pe], ids[pe])) for pe in range(p)]
        if all(len(g) == 1 for g in gs):
            cont = [ops.sort(items[pe]) for pe in range(p)]
            counts = [len(x) for x in items]
        else:
            cont, counts = _hypercube(machine, gs, items, ops, None, "rquick", on_round)
            cont = _redistribute(machine, gs, cont, ops)
    return RquickResult([ops.finish(cont[pe]) if pe in in_group else None for pe in range(p)], counts)


def atomic_sort_traced(machine: Machine, keys: Sequence[Sequence[int]],
                       idx: Sequence[Sequence[int]]) -> tuple[list[list[tuple[int, int, int]]], Route]:
    """Hypercube quicksort of (key, index) pairs over the whole machine.

    Returns the sorted (key, index, slot) lists per PE and the route used
    to send per-element answers back to the origin positions.
    """
    p = machine.p
    route = Route(p)
    items = [[(k, i, s) for s, (k, i) in enumerate(zip(keys[pe], idx[pe]))] for pe in range(p)]
    if p == 1:
        route.begin()
        items = [route.relabel(0, 0, sorted(items[0]))]
        route.end()
        return items, route
    cont, _ = _hypercube(machine, [list(range(p))], items, _AtomicOps(), route, "atomic")
    return cont, route
