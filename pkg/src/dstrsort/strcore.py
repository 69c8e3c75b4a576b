"""Sequential string primitives: arenas, LCPs, local sorting, LCP-aware merging,
LCP compression and the byte layout used on the wire."""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SENTINEL = 0
MAX_STRING_LEN = 2**32 - 1
INSERTION_CUTOFF = 32


class ArenaError(ValueError):
    pass


class CompressionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# LCP


def lcp(a: bytes, b: bytes, start: int = 0) -> int:
    """Length of the longest common prefix of ``a`` and ``b``.

    ``start`` is a known lower bound; the scan begins there. Work is
    proportional to the answer, chunks grow geometrically.
    """
    la, lb = len(a), len(b)
    m = la if la < lb else lb
    i = start
    step = 16
    while i < m:
        j = i + step
        if j > m:
            j = m
        x, y = a[i:j], b[i:j]
        if x != y:
            diff = int.from_bytes(x, "big") ^ int.from_bytes(y, "big")
            return j - ((diff.bit_length() + 7) >> 3)
        i = j
        step <<= 1
    return m


def lcp_array(strings: Sequence[bytes]) -> list[int]:
    out = [0] * len(strings)
    for i in range(1, len(strings)):
        out[i] = lcp(strings[i - 1], strings[i])
    return out


# ---------------------------------------------------------------------------
# Arena


class StringArena:
    """Contiguous character storage with a 0 sentinel after every string."""

    __slots__ = ("chars", "offsets", "_strings")

    def __init__(self, chars: bytes, offsets: Sequence[int], *, _strings=None):
        self.chars = bytes(chars)
        self.offsets = list(offsets)
        self._strings = _strings
        if _strings is None:
            self._check()

    def _check(self) -> None:
        chars, offs = self.chars, self.offsets
        if not offs:
            if chars:
                raise ArenaError("characters without offsets")
            self._strings = []
            return
        if offs[0] != 0:
            raise ArenaError("first offset must be 0")
        if not chars or chars[-1] != SENTINEL:
            raise ArenaError("arena must end with a sentinel")
        pieces = chars.split(b"\0")[:-1]
        if len(pieces) != len(offs):
            raise ArenaError("embedded 0 byte or offset/sentinel mismatch")
        pos = 0
        for o, s in zip(offs, pieces):
            if o != pos:
                raise ArenaError(f"offset {o} does not start a string")
            if not s:
                raise ArenaError("empty string in arena")
            pos += len(s) + 1
        self._strings = pieces

    @classmethod
    def from_strings(cls, strings: Iterable[bytes]) -> "StringArena":
        strings = [bytes(s) for s in strings]
        offsets = []
        pos = 0
        for s in strings:
            if not s:
                raise ArenaError("strings must be nonempty")
            if len(s) > MAX_STRING_LEN:
                raise ArenaError("string longer than 2^32-1")
            if b"\0" in s:
                raise ArenaError("0 byte inside a string body")
            offsets.append(pos)
            pos += len(s) + 1
        chars = b"\0".join(strings) + b"\0" if strings else b""
        return cls(chars, offsets, _strings=strings)

    @property
    def strings(self) -> list[bytes]:
        return self._strings

    def __len__(self) -> int:
        return len(self.offsets)

    def __getitem__(self, i):
        return self._strings[i]

    def __iter__(self):
        return iter(self._strings)

    def __eq__(self, other) -> bool:
        return isinstance(other, StringArena) and self.chars == other.chars

    def __repr__(self) -> str:
        return f"StringArena(n={len(self)}, N={self.total_chars})"

    @property
    def total_chars(self) -> int:
        return len(self.chars) - len(self.offsets)

    @property
    def max_len(self) -> int:
        return max(map(len, self._strings), default=0)

    @property
    def min_len(self) -> int:
        return min(map(len, self._strings), default=0)


def as_strings(x) -> list[bytes]:
    if isinstance(x, StringArena):
        return x.strings
    if isinstance(x, SortedRun):
        return x.strings
    return list(x)


# ---------------------------------------------------------------------------
# Sorted runs


@dataclass
class SortedRun:
    """Sorted strings, their LCP array and optional origin ids.

    When ``ids`` is present it travels with the strings and breaks ties
    between equal strings.
    """

    strings: list[bytes]
    lcp: list[int]
    ids: list[int] | None = None

    def __post_init__(self):
        if len(self.strings) != len(self.lcp):
            raise ValueError("strings and lcp differ in length")
        if self.ids is not None and len(self.ids) != len(self.strings):
            raise ValueError("ids and strings differ in length")

    def __len__(self) -> int:
        return len(self.strings)

    @classmethod
    def empty(cls, with_ids: bool = False) -> "SortedRun":
        return cls([], [], [] if with_ids else None)

    @property
    def arena(self) -> StringArena:
        return StringArena.from_strings(self.strings)

    @property
    def total_chars(self) -> int:
        return sum(map(len, self.strings))

    def slice(self, lo: int, hi: int) -> "SortedRun":
        lc = self.lcp[lo:hi]
        if lc:
            lc[0] = 0
        ids = None if self.ids is None else self.ids[lo:hi]
        return SortedRun(self.strings[lo:hi], lc, ids)

    def without_ids(self) -> "SortedRun":
        return SortedRun(self.strings, self.lcp, None)

    def validate(self) -> None:
        """Raise ValueError unless sorted (ids break ties) with a correct LCP array."""
        s, ids = self.strings, self.ids
        if s and self.lcp[0] != 0:
            raise ValueError("lcp[0] must be 0")
        for i in range(1, len(s)):
            if s[i - 1] > s[i]:
                raise ValueError(f"unsorted at {i}")
            if ids is not None and s[i - 1] == s[i] and ids[i - 1] > ids[i]:
                raise ValueError(f"tie order violated at {i}")
            if self.lcp[i] != lcp(s[i - 1], s[i]):
                raise ValueError(f"wrong lcp at {i}")


# ---------------------------------------------------------------------------
# Local sorting: multikey quicksort with LCP output


def _insertion_sort(S, idx: list[int], depth: int) -> list[int]:
    out: list[int] = []
    keys: list[bytes] = []
    for i in idx:
        k = S[i][depth:]
        j = len(out)
        while j > 0 and keys[j - 1] > k:
            j -= 1
        out.insert(j, i)
        keys.insert(j, k)
    return out


def multikey_quicksort(strings: Sequence[bytes]) -> tuple[list[int], list[int]]:
    """Stable ternary string quicksort. Returns (order, lcp array)."""
    S = strings
    n = len(S)
    order: list[int] = []
    lcps: list[int] = []
    if n == 0:
        return order, lcps
    # stack of (indices, depth, lcp to whatever is emitted just before)
    stack: list[tuple[list[int], int, int]] = [(list(range(n)), 0, 0)]
    while stack:
        idx, depth, first = stack.pop()
        if len(idx) == 1:
            order.append(idx[0])
            lcps.append(first)
            continue
        sub = [S[i] for i in idx]
        lo, hi = min(sub), max(sub)
        if lo == hi:
            order.extend(idx)
            lcps.append(first)
            lcps.extend([len(lo)] * (len(idx) - 1))
            continue
        depth = lcp(lo, hi, depth)
        if len(idx) <= INSERTION_CUTOFF:
            srt = _insertion_sort(S, idx, depth)
            order.extend(srt)
            lcps.append(first)
            prev = S[srt[0]]
            for i in srt[1:]:
                cur = S[i]
                lcps.append(lcp(prev, cur, depth))
                prev = cur
            continue
        chars = [s[depth] if depth < len(s) else -1 for s in sub]
        a, b, c = chars[0], chars[len(chars) // 2], chars[-1]
        pivot = sorted((a, b, c))[1]
        less = [i for i, ch in zip(idx, chars) if ch < pivot]
        equal = [i for i, ch in zip(idx, chars) if ch == pivot]
        greater = [i for i, ch in zip(idx, chars) if ch > pivot]
        eq_first = depth if less else first
        gt_first = depth if (less or equal) else first
        if greater:
            stack.append((greater, depth, gt_first))
        if equal:
            # pivot -1: these strings end at depth and are identical
            stack.append((equal, depth if pivot == -1 else depth + 1, eq_first))
        if less:
            stack.append((less, depth, first))
    return order, lcps


def local_sort(data, ids: Sequence[int] | None = None, method: str = "mkqs") -> SortedRun:
    """Sort a collection of strings, returning a SortedRun.

    The result's ``ids`` hold ``ids[i]`` for each input position, or the
    original positions (a permutation witness) when ``ids`` is omitted.
    Equal strings keep their input order, or are ordered by id when ids
    are given.
    """
    S = as_strings(data)
    if method == "mkqs":
        order, lc = multikey_quicksort(S)
        out = [S[i] for i in order]
    elif method == "timsort":
        order = sorted(range(len(S)), key=S.__getitem__)
        out = [S[i] for i in order]
        lc = lcp_array(out)
    else:
        raise ValueError(f"unknown local sorter {method!r}")
    if ids is None:
        return SortedRun(out, lc, order)
    got = [ids[i] for i in order]
    i, n = 1, len(out)
    while i < n:
        if out[i] != out[i - 1]:
            i += 1
            continue
        j = i
        while j < n and out[j] == out[i - 1]:
            j += 1
        got[i - 1:j] = sorted(got[i - 1:j])
        i = j
    return SortedRun(out, lc, got)


# ---------------------------------------------------------------------------
# LCP loser tree


def losertree_merge(runs: Sequence[SortedRun], tie: str | None = None) -> SortedRun:
    """Merge sorted runs with an LCP loser tree.

    Equal strings are ordered by input run index, or by ``ids`` when
    ``tie == "ids"`` (default when every run carries ids).
    """
    runs = list(runs)
    with_ids = bool(runs) and all(r.ids is not None for r in runs)
    if tie is None:
        tie = "ids" if with_ids else "run"
    k = len(runs)
    if k == 0:
        return SortedRun([], [], None)
    if k == 1:
        r = runs[0]
        return SortedRun(list(r.strings), list(r.lcp), None if r.ids is None else list(r.ids))
    K = 1
    while K < k:
        K <<= 1
    strs = [r.strings for r in runs] + [[]] * (K - k)
    lcps = [r.lcp for r in runs] + [[]] * (K - k)
    idss = [r.ids if with_ids else None for r in runs] + [None] * (K - k)
    pos = [0] * K
    cur: list[bytes | None] = [s[0] if s else None for s in strs]
    h = [0] * K
    use_ids = tie == "ids"

    def beats(x: int, y: int) -> bool:
        """True if candidate x < candidate y. Updates the loser's h."""
        sx, sy = cur[x], cur[y]
        if sy is None:
            return True
        if sx is None:
            return False
        hx, hy = h[x], h[y]
        if hx > hy:
            return True
        if hx < hy:
            return False
        lx, ly = len(sx), len(sy)
        l = lcp(sx, sy, hx)
        if l == lx:
            if l == ly:
                if use_ids:
                    win = idss[x][pos[x]] < idss[y][pos[y]]
                else:
                    win = x < y
            else:
                win = True
        elif l == ly:
            win = False
        else:
            win = sx[l] < sy[l]
        if win:
            h[y] = l
        else:
            h[x] = l
        return win

    # build: tree[node] holds the loser, winners propagate upward
    tree = [0] * K
    winners = list(range(K))  # winners at level being built
    level_nodes = K
    while level_nodes > 1:
        nxt = []
        base = level_nodes // 2
        for j in range(0, level_nodes, 2):
            a, b = winners[j], winners[j + 1]
            if beats(a, b):
                tree[base + j // 2] = b
                nxt.append(a)
            else:
                tree[base + j // 2] = a
                nxt.append(b)
        winners = nxt
        level_nodes = base
    win = winners[0]

    total = sum(len(r) for r in runs)
    out: list[bytes] = []
    out_lcp: list[int] = []
    out_ids: list[int] | None = [] if with_ids else None
    append, lappend = out.append, out_lcp.append
    _lcp = lcp
    for _ in range(total):
        w = win
        append(cur[w])
        lappend(h[w])
        if out_ids is not None:
            out_ids.append(idss[w][pos[w]])
        p_ = pos[w] + 1
        pos[w] = p_
        sw = strs[w]
        if p_ < len(sw):
            sw = cur[w] = sw[p_]
            hw = lcps[w][p_]
        else:
            sw = cur[w] = None
            hw = 0
        # replay the path to the root; the comparison is beats() inlined
        node = (w + K) >> 1
        while node:
            o = tree[node]
            so = cur[o]
            if so is None:
                node >>= 1
                continue
            if sw is not None:
                ho = h[o]
                if hw > ho:
                    node >>= 1
                    continue
                if hw == ho:
                    lw, lo_ = len(sw), len(so)
                    if hw < lw and hw < lo_ and sw[hw] != so[hw]:
                        l = hw
                    else:
                        l = _lcp(sw, so, hw)
                    if l == lw:
                        if l == lo_:
                            wins = idss[w][pos[w]] < idss[o][pos[o]] if use_ids else w < o
                        else:
                            wins = True
                    elif l == lo_:
                        wins = False
                    else:
                        wins = sw[l] < so[l]
                    if wins:
                        h[o] = l
                        node >>= 1
                        continue
                    hw = l
            tree[node] = w
            h[w] = hw
            w, sw, hw = o, so, h[o]
            node >>= 1
        h[w] = hw
        win = w
    if out_lcp:
        out_lcp[0] = 0
    return SortedRun(out, out_lcp, out_ids)


# ---------------------------------------------------------------------------
# LCP compression


@dataclass
class CompressedRun:
    lcp_len: list[int]
    suffixes: list[bytes]
    ids: list[int] | None = None
    n: int = field(init=False)

    def __post_init__(self):
        self.n = len(self.suffixes)
        if len(self.lcp_len) != self.n:
            raise CompressionError("header count mismatch")

    @property
    def payload_size(self) -> int:
        return sum(map(len, self.suffixes))


def lcp_compress(run: SortedRun) -> CompressedRun:
    return CompressedRun(list(run.lcp), [s[h:] for s, h in zip(run.strings, run.lcp)],
                         None if run.ids is None else list(run.ids))


def lcp_decompress(c: CompressedRun) -> SortedRun:
    out: list[bytes] = []
    prev = b""
    for i, (h, suf) in enumerate(zip(c.lcp_len, c.suffixes)):
        if h > len(prev) or (i == 0 and h != 0):
            raise CompressionError(f"lcp {h} at {i} exceeds predecessor length {len(prev)}")
        prev = prev[:h] + suf
        out.append(prev)
    return SortedRun(out, list(c.lcp_len), None if c.ids is None else list(c.ids))


# ---------------------------------------------------------------------------
# Wire layout
#
# u8 flags | u32 n | n x u32 lcp | n x u32 body length | [n x u64 ids] | bodies
# flag bit 0: bodies are suffixes after the lcp; bit 1: ids present.

_HDR = struct.Struct("<BI")
FLAG_COMPRESSED = 1
FLAG_IDS = 2


def encode_run(run: SortedRun, compress: bool = False, with_ids: bool | None = None) -> bytes:
    if with_ids is None:
        with_ids = run.ids is not None
    n = len(run)
    flags = (FLAG_COMPRESSED if compress else 0) | (FLAG_IDS if with_ids else 0)
    if compress:
        bodies = [s[h:] for s, h in zip(run.strings, run.lcp)]
    else:
        bodies = run.strings
    parts = [_HDR.pack(flags, n)]
    if n:
        parts.append(np.asarray(run.lcp, dtype="<u4").tobytes())
        parts.append(np.fromiter(map(len, bodies), dtype="<u4", count=n).tobytes())
        if with_ids:
            parts.append(np.asarray(run.ids, dtype="<u8").tobytes())
        parts.append(b"".join(bodies))
    return b"".join(parts)


def decode_run(buf: bytes) -> SortedRun:
    flags, n = _HDR.unpack_from(buf, 0)
    off = _HDR.size
    if n == 0:
        return SortedRun([], [], [] if flags & FLAG_IDS else None)
    lc = np.frombuffer(buf, dtype="<u4", count=n, offset=off).tolist()
    off += 4 * n
    lens = np.frombuffer(buf, dtype="<u4", count=n, offset=off)
    off += 4 * n
    ids = None
    if flags & FLAG_IDS:
        ids = np.frombuffer(buf, dtype="<u8", count=n, offset=off).tolist()
        off += 8 * n
    ends = (np.cumsum(lens, dtype=np.int64) + off).tolist()
    if ends[-1] != len(buf):
        raise CompressionError("payload length mismatch")
    starts = [off] + ends[:-1]
    bodies = [buf[a:b] for a, b in zip(starts, ends)]
    if flags & FLAG_COMPRESSED:
        return lcp_decompress(CompressedRun(lc, bodies, ids))
    return SortedRun(bodies, lc, ids)


# ---------------------------------------------------------------------------
# Distinguishing prefixes


@dataclass
class DistPrefixes:
    lengths: list[int]
    total: int
    longest: int


def distinguishing_prefixes(run: SortedRun) -> DistPrefixes:
    """d(s_i) = min(|s_i|, 1 + max(lcp[i], lcp[i+1])) over a globally sorted run."""
    s, lc = run.strings, run.lcp
    n = len(s)
    out = [0] * n
    for i in range(n):
        left = lc[i] if i > 0 else 0
        right = lc[i + 1] if i + 1 < n else 0
        out[i] = min(len(s[i]), 1 + max(left, right))
    return DistPrefixes(out, sum(out), max(out, default=0))


def bucket_bounds(strings: Sequence[bytes], splitters: Sequence[bytes]) -> list[int]:
    """Start index of each bucket f_j < s <= f_{j+1}, plus the end."""
    bounds = [0]
    for f in splitters:
        bounds.append(bisect.bisect_right(strings, f))
    bounds.append(len(strings))
    return bounds
