"""Synthetic corpora with a controllable D/N ratio, corpus files, and the
sequential ground-truth sort."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .strcore import ArenaError, SortedRun, StringArena, as_strings, distinguishing_prefixes

MAGIC = b"DSS1"
PERM_MAGIC = b"DSP1"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class DnSpec:
    n: int
    len: int
    dn_ratio: float
    sigma: int = 4
    seed: int = 0

    def digits(self) -> int:
        """Characters needed to give every string a distinct code."""
        if self.n <= 1:
            return 1 if self.n == 1 else 0
        t, cap = 1, self.sigma
        while cap < self.n:
            t += 1
            cap *= self.sigma
        return t

    def unique_block(self) -> int:
        return max(math.ceil(self.dn_ratio * self.len - 1e-9), self.digits())

    def check(self) -> None:
        if self.n < 0:
            raise CorpusError("n must be non-negative")
        if self.len < 1:
            raise CorpusError("len must be >= 1")
        if not 2 <= self.sigma <= 255:
            raise CorpusError("sigma must lie in 2..255")
        if not 0.0 <= self.dn_ratio <= 1.0:
            raise CorpusError("dn_ratio must lie in [0, 1]")
        if self.digits() > self.len:
            raise CorpusError(
                f"infeasible: {self.n} distinct strings need {self.digits()} characters "
                f"over sigma={self.sigma} but len={self.len}")


def _unique_codes(n: int, universe: int, rng: np.random.Generator) -> np.ndarray:
    """n distinct values from [0, universe), in draw order."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    got = np.zeros(0, dtype=np.int64)
    while len(got) < n:
        draw = rng.integers(0, universe, size=max(2 * (n - len(got)), 16), dtype=np.int64)
        allv = np.concatenate([got, draw])
        _, first = np.unique(allv, return_index=True)
        got = allv[np.sort(first)][:n]
    return got


def generate_dn(spec: DnSpec) -> StringArena:
    """Strings of length ``len`` whose distinguishing prefixes cover about
    ``dn_ratio`` of all characters.

    Layout of each string: a run of character 1 shared by all strings,
    then ``t`` base-sigma digits of a distinct random code (so strings
    separate only there), then filler character 1 up to ``len``. The
    shared run has length ``ceil(dn_ratio*len) - t``.
    """
    spec.check()
    n, L = spec.n, spec.len
    if n == 0:
        return StringArena(b"", [])
    t = spec.digits()
    block = spec.unique_block()
    rng = np.random.default_rng(spec.seed)
    codes = _unique_codes(n, spec.sigma ** t, rng)
    mat = np.ones((n, L), dtype=np.uint8)
    start = block - t
    rest = codes.copy()
    for col in range(start + t - 1, start - 1, -1):
        mat[:, col] = (rest % spec.sigma + 1).astype(np.uint8)
        rest //= spec.sigma
    buf = mat.tobytes()
    strings = [buf[i * L:(i + 1) * L] for i in range(n)]
    return StringArena.from_strings(strings)


def generate_random(n: int, min_len: int, max_len: int, sigma: int = 255, seed: int = 0) -> StringArena:
    """Uniformly random strings, lengths uniform in [min_len, max_len]."""
    rng = np.random.default_rng(seed)
    lens = rng.integers(min_len, max_len + 1, size=n)
    body = (rng.integers(0, sigma, size=int(lens.sum()), dtype=np.int64) + 1).astype(np.uint8).tobytes()
    ends = np.cumsum(lens).tolist()
    starts = [0] + ends[:-1]
    return StringArena.from_strings([body[a:b] for a, b in zip(starts, ends)])


def generate_duplicates(n: int, distinct: int, length: int, sigma: int = 4, seed: int = 0) -> StringArena:
    """n strings drawn with replacement from a pool of ``distinct`` random ones."""
    pool = generate_random(max(distinct, 1), 1, length, sigma, seed).strings
    rng = np.random.default_rng(seed + 1)
    pick = rng.integers(0, len(pool), size=n).tolist()
    return StringArena.from_strings([pool[i] for i in pick])


def measured_dn(arena) -> float:
    strings = as_strings(arena)
    N = sum(map(len, strings))
    if N == 0:
        return 0.0
    return distinguishing_prefixes(oracle_sort(strings)).total / N


# ---------------------------------------------------------------------------
# Oracle


def _lcp_bisect(a: bytes, b: bytes) -> int:
    lo, hi = 0, min(len(a), len(b))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def oracle_sort(data) -> SortedRun:
    """Plain comparison sort, stable by original index; ``ids`` is the
    permutation (position i holds the input index of the i-th string)."""
    strings = as_strings(data)
    perm = sorted(range(len(strings)), key=strings.__getitem__)
    out = [strings[i] for i in perm]
    lc = [0] * min(len(out), 1) + [_lcp_bisect(out[i - 1], out[i]) for i in range(1, len(out))]
    return SortedRun(out, lc, perm)


# ---------------------------------------------------------------------------
# Files


def write_corpus(arena, path, fmt: str = "bin") -> None:
    strings = as_strings(arena)
    path = Path(path)
    if fmt == "bin":
        lens = np.fromiter(map(len, strings), dtype="<u4", count=len(strings))
        with open(path, "wb") as f:
            f.write(MAGIC + struct.pack("<Q", len(strings)))
            if strings:
                # interleave u32 length and body
                heads = [h.tobytes() for h in lens]
                f.write(b"".join(x for pair in zip(heads, strings) for x in pair))
    elif fmt == "text":
        if any(b"\n" in s for s in strings):
            raise CorpusError("text format cannot hold newline characters")
        with open(path, "wb") as f:
            f.write(b"".join(s + b"\n" for s in strings))
    else:
        raise CorpusError(f"unknown format {fmt!r}")


def _parse_bin(data: bytes) -> list[bytes]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise CorpusError("malformed header")
    (count,) = struct.unpack_from("<Q", data, 4)
    out = []
    pos = 12
    end = len(data)
    unpack = struct.Struct("<I").unpack_from
    for i in range(count):
        if pos + 4 > end:
            raise CorpusError(f"truncated body at string {i}")
        (ln,) = unpack(data, pos)
        pos += 4
        if pos + ln > end:
            raise CorpusError(f"truncated body at string {i}")
        out.append(data[pos:pos + ln])
        pos += ln
    if pos != end:
        raise CorpusError("trailing bytes after last string")
    return out


def _parse_text(data: bytes) -> list[bytes]:
    if not data:
        return []
    lines = data.split(b"\n")
    if lines[-1] == b"":
        lines.pop()
    return lines


def read_corpus(path, fmt: str = "auto") -> StringArena:
    data = Path(path).read_bytes()
    if fmt == "auto":
        fmt = "bin" if data[:4] == MAGIC else "text"
    if fmt == "bin":
        strings = _parse_bin(data)
    elif fmt == "text":
        strings = _parse_text(data)
    else:
        raise CorpusError(f"unknown format {fmt!r}")
    try:
        return StringArena.from_strings(strings)
    except ArenaError as e:
        raise CorpusError(str(e)) from None


def write_permutation(perm, path) -> None:
    arr = np.asarray(perm, dtype="<u8")
    with open(path, "wb") as f:
        f.write(PERM_MAGIC + struct.pack("<Q", len(arr)) + arr.tobytes())


def read_permutation(path) -> list[int]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != PERM_MAGIC:
        raise CorpusError("malformed permutation header")
    (count,) = struct.unpack_from("<Q", data, 4)
    if len(data) != 12 + 8 * count:
        raise CorpusError("permutation length mismatch")
    return np.frombuffer(data, dtype="<u8", offset=12).tolist()
