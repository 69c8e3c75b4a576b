"""Distributed single-hash Bloom filter with grid routing and Elias-Fano
coded batches.

Each round builds a fresh filter of ``m`` positions spread evenly over
the PEs (owner of position x is floor(x*p/m)). Queries travel to the owner
in one hop per grid dimension; every hop sorts and deduplicates what it
forwards and remembers the fan-in, so a single bit per forwarded position
suffices to carry the answer back along the same route.

On sizing: a filter with ``m >= e*n`` positions for ``n`` queries keeps the
false-positive rate near ``1 - exp(-n/m)``; the rate shrinks as ``m/n``
grows. A condition of the shape ``m >= n*f`` (with ``f`` the target false
positive rate) cannot be right, since it would shrink the filter for
smaller rates; we size by ``m = ceil(e*n)`` unless told otherwise.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .simnet import Envelope, Machine, SimError

# Header: varint x, varint u, one byte b; low and high parts are each padded
# to whole bytes. 192 bits covers two 10-byte varints, the width byte and
# both paddings.
EF_CONSTANT_BITS = 192


class BloomError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Elias-Fano


def _varint(x: int) -> bytes:
    out = bytearray()
    while True:
        b = x & 0x7F
        x >>= 7
        if x:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    x = shift = 0
    while True:
        b = buf[pos]
        pos += 1
        x |= (b & 0x7F) << shift
        if not b & 0x80:
            return x, pos
        shift += 7


def ef_low_width(x: int, u: int) -> int:
    if x == 0:
        return 0
    q = u // x
    return max(0, q.bit_length() - 1)


@dataclass
class EliasFanoBlock:
    x: int
    universe: int
    width: int
    data: bytes

    @property
    def bits(self) -> int:
        return 8 * len(self.data)


def ef_encode(values, universe: int) -> EliasFanoBlock:
    vals = np.asarray(values, dtype=np.uint64)
    x = int(vals.size)
    if x:
        if np.any(vals[1:] <= vals[:-1]):
            raise BloomError("batch must be strictly ascending")
        if int(vals[-1]) >= universe:
            raise BloomError("value outside the universe")
    b = ef_low_width(x, universe)
    head = _varint(x) + _varint(universe) + bytes([b])
    if x == 0:
        return EliasFanoBlock(0, universe, b, head)
    if b:
        shifts = np.arange(b - 1, -1, -1, dtype=np.uint64)
        low_bits = ((vals[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        low = np.packbits(low_bits.ravel()).tobytes()
    else:
        low = b""
    high = vals >> np.uint64(b)
    ones = high + np.arange(x, dtype=np.uint64)
    hv = np.zeros(int(ones[-1]) + 1, dtype=np.uint8)
    hv[ones.astype(np.int64)] = 1
    return EliasFanoBlock(x, universe, b, head + low + np.packbits(hv).tobytes())


def ef_decode(block: EliasFanoBlock | bytes) -> np.ndarray:
    buf = block.data if isinstance(block, EliasFanoBlock) else block
    x, pos = _read_varint(buf, 0)
    _, pos = _read_varint(buf, pos)
    b = buf[pos]
    pos += 1
    if x == 0:
        return np.zeros(0, dtype=np.uint64)
    nlow = (x * b + 7) // 8
    if b:
        bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=nlow, offset=pos))[: x * b]
        weights = np.uint64(1) << np.arange(b - 1, -1, -1, dtype=np.uint64)
        low = (bits.reshape(x, b).astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
    else:
        low = np.zeros(x, dtype=np.uint64)
    hv = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, offset=pos + nlow))
    ones = np.flatnonzero(hv)[:x].astype(np.uint64)
    high = ones - np.arange(x, dtype=np.uint64)
    return (high << np.uint64(b)) | low


def ef_bound_bits(x: int, u: int) -> float:
    if x == 0:
        return EF_CONSTANT_BITS
    return x * (math.log2(u / x) + 2) + EF_CONSTANT_BITS


# ---------------------------------------------------------------------------
# hashing


def hash_prefixes(prefixes: Sequence[bytes], m: int, seed: int, rnd: int = 0) -> np.ndarray:
    """Keyed 64-bit hash of each byte string, reduced to [0, m) by multiply-shift."""
    if not 1 <= m < 2**32:
        raise BloomError("m must lie in [1, 2^32)")
    key = struct.pack("<QI", seed & (2**64 - 1), rnd)
    digest = b"".join(hashlib.blake2b(s, digest_size=8, key=key).digest() for s in prefixes)
    h = np.frombuffer(digest, dtype="<u8").astype(np.uint64)
    hi, lo = h >> np.uint64(32), h & np.uint64(0xFFFFFFFF)
    mm = np.uint64(m)
    return (hi * mm + ((lo * mm) >> np.uint64(32))) >> np.uint64(32)


# ---------------------------------------------------------------------------
# the filter round


@dataclass(frozen=True)
class DsbfConfig:
    m: int
    dims: tuple[int, ...]
    seed: int = 0

    @property
    def k_levels(self) -> int:
        return len(self.dims)


@dataclass
class DsbfStats:
    batches: list[tuple[int, int, int]] = field(default_factory=list)  # (x, universe, bits)
    hop_loads: list[list[int]] = field(default_factory=list)  # distinct positions per PE after each hop
    ascending: bool = True


def owner_of(pos: np.ndarray, p: int, m: int) -> np.ndarray:
    return (pos.astype(np.uint64) * np.uint64(p)) // np.uint64(m)


def dsbf_round(machine: Machine, positions: Sequence[np.ndarray], m: int, dims: Sequence[int],
               stats: DsbfStats | None = None) -> list[np.ndarray]:
    """Flag every queried position that occurs at least twice machine-wide.

    ``positions[pe]`` holds the positions queried by PE ``pe``. Returns one
    boolean array per PE, aligned with its queries.
    """
    p = machine.p
    dims = list(dims)
    if math.prod(dims) != p:
        raise SimError(f"grid dims {dims} do not multiply to p={p}")
    if m * p >= 2**63:
        raise BloomError("m*p too large")
    stats = stats if stats is not None else DsbfStats()
    strides = [math.prod(dims[t + 1:]) for t in range(len(dims))]

    held: list[np.ndarray] = []
    fanin: list[list[np.ndarray]] = [[] for _ in range(p)]  # per PE, per hop
    item_inv: list[np.ndarray] = []
    for pe in range(p):
        pos = np.asarray(positions[pe], dtype=np.uint64)
        if pos.size and int(pos.max()) >= m:
            raise BloomError("position outside [0, m)")
        u, inv, cnt = np.unique(pos, return_inverse=True, return_counts=True)
        held.append(u)
        item_inv.append(inv.reshape(-1))
        fanin[pe].append(cnt)
    # sent[t][pe] = list of (dst, indices into held before hop t)
    sent: list[list[list[tuple[int, np.ndarray]]]] = []
    # branches[t][pe] = list of (src, indices into held after hop t)
    branches: list[list[list[tuple[int, np.ndarray]]]] = []

    for t, d in enumerate(dims):
        stride = strides[t]
        out: list[list[Envelope]] = [[] for _ in range(p)]
        kept: list[tuple[int, np.ndarray] | None] = [None] * p
        sent_t: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(p)]
        for pe in range(p):
            vals = held[pe]
            own = owner_of(vals, p, m).astype(np.int64)
            mine = (pe // stride) % d
            dest = pe + (((own // stride) % d) - mine) * stride
            order = np.argsort(dest, kind="stable")
            ds = dest[order]
            cuts = np.flatnonzero(np.diff(ds)) + 1
            for idx in np.split(order, cuts) if order.size else []:
                q = int(dest[idx[0]])
                sent_t[pe].append((q, idx))
                batch = vals[idx]
                if q == pe:
                    kept[pe] = (pe, batch)
                    continue
                blk = ef_encode(batch, m)
                stats.batches.append((blk.x, m, blk.bits))
                out[pe].append(Envelope(pe, q, blk.data, nbytes=len(blk.data)))
        boxes = machine.superstep(out)
        sent.append(sent_t)
        br_t: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(p)]
        loads = []
        for pe in range(p):
            parts = [(e.src, ef_decode(e.payload)) for e in boxes[pe]]
            if kept[pe] is not None:
                parts.append(kept[pe])
            parts.sort(key=lambda x: x[0])
            if parts:
                allv = np.concatenate([v for _, v in parts])
                u, inv, cnt = np.unique(allv, return_inverse=True, return_counts=True)
            else:
                u, inv, cnt = np.zeros(0, np.uint64), np.zeros(0, np.int64), np.zeros(0, np.int64)
            off = 0
            for src, v in parts:
                br_t[pe].append((src, inv[off:off + v.size]))
                off += v.size
            held[pe] = u
            fanin[pe].append(cnt)
            loads.append(int(u.size))
            if u.size > 1 and not np.all(u[1:] > u[:-1]):
                stats.ascending = False
        branches.append(br_t)
        stats.hop_loads.append(loads)

    k = len(dims)
    ans = [fanin[pe][k] >= 2 for pe in range(p)]
    for t in range(k - 1, -1, -1):
        out = [[] for _ in range(p)]
        nxt = [fanin[pe][t] >= 2 for pe in range(p)]
        local: list[np.ndarray | None] = [None] * p
        for pe in range(p):
            for src, inv in branches[t][pe]:
                bits = ans[pe][inv]
                if src == pe:
                    local[pe] = bits
                else:
                    out[pe].append(Envelope(pe, src, bits, nbytes=(bits.size + 7) // 8))
        boxes = machine.superstep(out)
        for pe in range(p):
            got = {e.src: e.payload for e in boxes[pe]}
            if local[pe] is not None:
                got[pe] = local[pe]
            for dst, idx in sent[t][pe]:
                nxt[pe][idx] |= got[dst]
        ans = nxt
    return [ans[pe][item_inv[pe]] for pe in range(p)]


def exact_duplicates(positions: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Reference answer: a position is a duplicate iff it occurs twice anywhere."""
    allv = np.concatenate([np.asarray(x, dtype=np.uint64) for x in positions]) if positions else np.zeros(0)
    u, cnt = np.unique(allv, return_counts=True)
    dup = set(u[cnt >= 2].tolist())
    return [np.array([int(v) in dup for v in np.asarray(x).tolist()], dtype=bool) for x in positions]


def fp_rate_estimate(n: int, m: int, seeds: Sequence[int], p: int = 4,
                     dims: Sequence[int] | None = None) -> float:
    """Mean fraction of n distinct items flagged as duplicates, over seeds."""
    if n == 0:
        return 0.0
    dims = list(dims) if dims else [p]
    items = [i.to_bytes(8, "little") for i in range(n)]
    rates = []
    for seed in seeds:
        pos = hash_prefixes(items, m, seed)
        parts = [pos[i * n // p:(i + 1) * n // p] for i in range(p)]
        flags = dsbf_round(Machine(p, seed=seed), parts, m, dims)
        rates.append(sum(int(f.sum()) for f in flags) / n)
    return sum(rates) / len(rates)
