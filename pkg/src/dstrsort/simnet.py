"""A deterministic bulk-synchronous machine of ``p`` virtual PEs.

PEs exchange :class:`Envelope` objects in supersteps. Every send is booked
in a :class:`CommLedger` under the currently open phase name. Collectives
run on lists of disjoint PE groups at once, so groups working side by side
share supersteps the way they would on a real machine.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np


class SimError(ValueError):
    pass


_FIXED = (bool, int, float, np.integer, np.floating)
_BLOBS = (bytes, bytearray, memoryview)


def wire_size(obj: Any) -> int:
    """Bytes an object occupies on the wire (ints and floats take 8).

    Nested bytes, lists and tuples carry a 4-byte length prefix.
    """
    t = type(obj)
    if t is bytes:
        return len(obj)
    if t is int or t is float or t is bool:
        return 8
    if t is list or t is tuple:
        total = 0
        for x in obj:
            tx = type(x)
            if tx is bytes:
                total += len(x) + 4
            elif tx is int or tx is float:
                total += 8
            elif tx is tuple or tx is list:
                total += wire_size(x) + 4
            else:
                total += wire_size(x)
                if isinstance(x, (bytearray, list, tuple)):
                    total += 4
        return total
    if obj is None:
        return 0
    if isinstance(obj, _BLOBS):
        return len(obj)
    if isinstance(obj, _FIXED):
        return 8
    if isinstance(obj, str):
        return len(obj.encode())
    if isinstance(obj, np.ndarray):
        return obj.nbytes
    if isinstance(obj, (list, tuple)):
        return wire_size(list(obj))
    if isinstance(obj, dict):
        return sum(wire_size(k) + wire_size(v) for k, v in obj.items())
    raise TypeError(f"no wire size for {type(obj).__name__}")


@dataclass
class Envelope:
    src: int
    dst: int
    payload: Any
    phase: str = ""
    nbytes: int = -1

    def __post_init__(self):
        if self.nbytes < 0:
            self.nbytes = wire_size(self.payload)


class PhaseStats:
    __slots__ = ("msgs_sent", "msgs_received", "bytes_sent", "bytes_received",
                 "supersteps", "max_step_sends", "max_step_recvs")

    def __init__(self, p: int):
        self.msgs_sent = [0] * p
        self.msgs_received = [0] * p
        self.bytes_sent = [0] * p
        self.bytes_received = [0] * p
        self.supersteps = 0
        self.max_step_sends = 0
        self.max_step_recvs = 0

    def to_json(self) -> dict:
        return {
            "pes": {str(i): {"msgs_sent": self.msgs_sent[i], "msgs_received": self.msgs_received[i],
                             "bytes_sent": self.bytes_sent[i], "bytes_received": self.bytes_received[i]}
                    for i in range(len(self.msgs_sent))},
            "supersteps": self.supersteps,
            "max_step_sends": self.max_step_sends,
            "max_step_recvs": self.max_step_recvs,
        }


class CommLedger:
    """Per-phase, per-PE message and byte counters."""

    def __init__(self, p: int):
        self.p = p
        self.phases: dict[str, PhaseStats] = {}

    def stats(self, phase: str) -> PhaseStats:
        st = self.phases.get(phase)
        if st is None:
            st = self.phases[phase] = PhaseStats(self.p)
        return st

    def record_step(self, phase: str, inboxes: Sequence[Sequence[Envelope]]) -> None:
        st = self.stats(phase)
        st.supersteps += 1
        sends = [0] * self.p
        for dst, box in enumerate(inboxes):
            for e in box:
                sends[e.src] += 1
                st.msgs_sent[e.src] += 1
                st.bytes_sent[e.src] += e.nbytes
                st.bytes_received[dst] += e.nbytes
            st.msgs_received[dst] += len(box)
            st.max_step_recvs = max(st.max_step_recvs, len(box))
        st.max_step_sends = max(st.max_step_sends, max(sends, default=0))

    def select(self, pred: Callable[[str], bool]) -> list[str]:
        return [name for name in self.phases if pred(name)]

    def total(self, field: str, pred: Callable[[str], bool] = lambda _: True) -> int:
        return sum(sum(getattr(st, field)) for name, st in self.phases.items() if pred(name))

    def per_pe(self, field: str, pred: Callable[[str], bool] = lambda _: True) -> list[int]:
        out = [0] * self.p
        for name, st in self.phases.items():
            if pred(name):
                for i, x in enumerate(getattr(st, field)):
                    out[i] += x
        return out

    def supersteps(self, pred: Callable[[str], bool] = lambda _: True) -> int:
        return sum(st.supersteps for name, st in self.phases.items() if pred(name))

    def to_json(self) -> dict:
        return {name: st.to_json() for name, st in self.phases.items()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def is_exchange_phase(name: str) -> bool:
    return name.rsplit("/", 1)[-1] == "exchange"


class Machine:
    """p virtual PEs plus a ledger.

    ``order`` permutes the sequence in which per-PE step functions are
    invoked; results never depend on it.
    """

    def __init__(self, p: int, seed: int = 0, order: Sequence[int] | None = None,
                 schedule: Sequence[int] | None = None):
        if p < 1:
            raise SimError("p must be >= 1")
        self.p = p
        self.seed = seed
        self.schedule = tuple(schedule) if schedule else None
        if self.schedule and math.prod(self.schedule) != p:
            raise SimError("schedule does not multiply to p")
        self.order = list(order) if order is not None else list(range(p))
        if sorted(self.order) != list(range(p)):
            raise SimError("order must be a permutation of the PEs")
        self.ledger = CommLedger(p)
        self._phase: list[str] = []
        self.steps = 0

    @property
    def phase_name(self) -> str:
        return "/".join(self._phase) if self._phase else "main"

    @contextmanager
    def phase(self, name: str):
        self._phase.append(name)
        try:
            yield
        finally:
            self._phase.pop()

    def rng(self, pe: int, tag: str = "") -> random.Random:
        h = hashlib.blake2b(f"{self.seed}/{pe}/{tag}".encode(), digest_size=8).digest()
        return random.Random(int.from_bytes(h, "little"))

    def superstep(self, outboxes: Sequence[Iterable[Envelope]]) -> list[list[Envelope]]:
        """Deliver all envelopes; inboxes ordered by (src, send order)."""
        p = self.p
        phase = self.phase_name
        inboxes: list[list[Envelope]] = [[] for _ in range(p)]
        for src in range(p):
            for e in outboxes[src] if src < len(outboxes) else ():
                if not 0 <= e.dst < p:
                    raise SimError(f"destination {e.dst} out of range")
                if e.src != src:
                    raise SimError("envelope src does not match sender")
                e.phase = phase
                inboxes[e.dst].append(e)
        self.ledger.record_step(phase, inboxes)
        self.steps += 1
        return inboxes

    def run_superstep(self, step: Callable[[int], Iterable[Envelope] | None]) -> list[list[Envelope]]:
        outboxes: list[list[Envelope]] = [[] for _ in range(self.p)]
        for pe in self.order:
            out = step(pe)
            if out:
                outboxes[pe] = list(out)
        return self.superstep(outboxes)

    def send_all(self, msgs: Iterable[tuple[int, int, Any]]) -> list[list[Envelope]]:
        """One superstep from a flat list of (src, dst, payload)."""
        out: list[list[Envelope]] = [[] for _ in range(self.p)]
        for src, dst, payload in msgs:
            out[src].append(Envelope(src, dst, payload))
        return self.superstep(out)


# ---------------------------------------------------------------------------
# Collectives over disjoint groups


Group = Sequence[int]


def _groups(machine: Machine, groups) -> list[list[int]]:
    if isinstance(groups, range) or (groups and isinstance(groups[0], (int, np.integer))):
        groups = [groups]
    out = [list(g) for g in groups]
    seen: set[int] = set()
    for g in out:
        if not g:
            raise SimError("empty group")
        for pe in g:
            if not 0 <= pe < machine.p or pe in seen:
                raise SimError("groups must be disjoint PE sets within the machine")
            seen.add(pe)
    return out


def _rounds(size: int) -> int:
    return (size - 1).bit_length()


def broadcast(machine: Machine, groups, values: Sequence[Any], root: int = 0) -> list[Any]:
    """Binomial-tree broadcast from group rank ``root``; ceil(log2 |g|) supersteps."""
    gs = _groups(machine, groups)
    have = list(values)
    for g in gs:
        for pe in g:
            if pe != g[root]:
                have[pe] = None
    for j in range(max((_rounds(len(g)) for g in gs), default=0)):
        msgs = []
        for g in gs:
            n = len(g)
            for rank in range(min(1 << j, n)):
                dst = rank + (1 << j)
                if dst < n:
                    src_pe = g[(rank + root) % n]
                    msgs.append((src_pe, g[(dst + root) % n], have[src_pe]))
        for box in machine.send_all(msgs):
            for e in box:
                have[e.dst] = e.payload
    return have


def allgather(machine: Machine, groups, values: Sequence[Any]) -> list[list[Any] | None]:
    """Every member ends with the list of all members' values in group order.

    Dissemination scheme: ceil(log2 |g|) supersteps; in round j rank i
    forwards what it holds to rank i - 2^j (mod |g|).
    """
    gs = _groups(machine, groups)
    out: list[list[Any] | None] = [None] * machine.p
    held: dict[int, list[Any]] = {}
    for g in gs:
        for pe in g:
            held[pe] = [values[pe]]  # blocks for ranks rank, rank+1, ...
    for j in range(max((_rounds(len(g)) for g in gs), default=0)):
        msgs = []
        for g in gs:
            n = len(g)
            if (1 << j) >= n:
                continue
            for rank, pe in enumerate(g):
                need = min(1 << j, n - (1 << j))
                msgs.append((pe, g[(rank - (1 << j)) % n], held[pe][:need]))
        for box in machine.send_all(msgs):
            for e in box:
                held[e.dst] = held[e.dst] + e.payload
    for g in gs:
        n = len(g)
        for rank, pe in enumerate(g):
            blocks = held[pe][:n]
            out[pe] = [blocks[(r - rank) % n] for r in range(n)]
    return out


def allreduce(machine: Machine, groups, values: Sequence[Any], op: Callable[[Any, Any], Any]) -> list[Any]:
    gathered = allgather(machine, groups, values)
    out: list[Any] = [None] * machine.p
    for pe, vals in enumerate(gathered):
        if vals is not None:
            acc = vals[0]
            for v in vals[1:]:
                acc = op(acc, v)
            out[pe] = acc
    return out


def prefix_sum(machine: Machine, groups, values: Sequence[Any],
               op: Callable[[Any, Any], Any] = lambda a, b: a + b, identity: Any = 0,
               reverse: bool = False) -> list[Any]:
    """Exclusive scan in group order (or reverse order); ceil(log2 |g|) supersteps.

    ``op`` must be associative; it is applied as op(earlier, later).
    """
    gs = _groups(machine, groups)
    if reverse:
        gs = [g[::-1] for g in gs]
    incl = list(values)
    excl: list[Any] = [None] * machine.p
    for g in gs:
        for pe in g:
            excl[pe] = identity
    for j in range(max((_rounds(len(g)) for g in gs), default=0)):
        msgs = []
        for g in gs:
            for rank, pe in enumerate(g):
                if rank + (1 << j) < len(g):
                    msgs.append((pe, g[rank + (1 << j)], incl[pe]))
        boxes = machine.send_all(msgs)
        for g in gs:
            for pe in g:
                for e in boxes[pe]:
                    incl[pe] = op(e.payload, incl[pe])
                    excl[pe] = op(e.payload, excl[pe])
    return [excl[pe] if excl[pe] is not None else None for pe in range(machine.p)]


def vector_add(a, b):
    return [x + y for x, y in zip(a, b)]


# ---------------------------------------------------------------------------
# Grid all-to-all


def grid_coords(pe: int, dims: Sequence[int]) -> list[int]:
    out = []
    for d in reversed(dims):
        out.append(pe % d)
        pe //= d
    return out[::-1]


def grid_pe(coords: Sequence[int], dims: Sequence[int]) -> int:
    pe = 0
    for c, d in zip(coords, dims):
        pe = pe * d + c
    return pe


def grid_hop(src: int, dst: int, dims: Sequence[int], t: int) -> int:
    """Where an item at ``src`` heading to ``dst`` goes in round ``t``."""
    c = grid_coords(src, dims)
    c[t] = grid_coords(dst, dims)[t]
    return grid_pe(c, dims)


def grid_alltoall(machine: Machine, dims: Sequence[int],
                  payloads: Sequence[dict[int, bytes]]) -> list[list[tuple[int, bytes]]]:
    """Deliver ``payloads[src][dst]`` in ``len(dims)`` rounds along grid rows.

    Each forwarded item carries an 8-byte (source, destination) header.
    Returns, per PE, (source, payload) pairs ordered by source.
    """
    dims = list(dims)
    if math.prod(dims) != machine.p:
        raise SimError(f"grid dims {dims} do not multiply to p={machine.p}")
    held: list[list[tuple[int, int, bytes]]] = [[] for _ in range(machine.p)]
    for src in range(machine.p):
        for dst, data in sorted(payloads[src].items()):
            if not 0 <= dst < machine.p:
                raise SimError(f"destination {dst} out of range")
            held[src].append((src, dst, data))
    for t in range(len(dims)):
        outboxes: list[list[Envelope]] = [[] for _ in range(machine.p)]
        keep: list[list[tuple[int, int, bytes]]] = [[] for _ in range(machine.p)]
        for pe in range(machine.p):
            by_next: dict[int, list[tuple[int, int, bytes]]] = {}
            for item in held[pe]:
                nxt = grid_hop(pe, item[1], dims, t)
                if nxt == pe:
                    keep[pe].append(item)
                else:
                    by_next.setdefault(nxt, []).append(item)
            for nxt in sorted(by_next):
                items = by_next[nxt]
                size = sum(8 + len(x[2]) for x in items)
                outboxes[pe].append(Envelope(pe, nxt, items, nbytes=size))
        boxes = machine.superstep(outboxes)
        for pe in range(machine.p):
            for e in boxes[pe]:
                keep[pe].extend(e.payload)
        held = keep
    return [sorted(((s, d) for s, _, d in held[pe]), key=lambda x: x[0]) for pe in range(machine.p)]
