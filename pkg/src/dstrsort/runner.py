"""Run one algorithm on one corpus, verify it against the oracle and
summarise the ledger. Shared by the CLI, the bench suites and the tests."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Any, Sequence

from .corpus import oracle_sort
from .msort import MsConfig, MsResult, level_balance_report, ms_sort
from .partition import SamplingConfig
from .pdms import PdmsConfig, PdmsResult, pdms_sort
from .rquick import rquick_sort
from .simnet import Machine, is_exchange_phase
from .strcore import SortedRun, as_strings, distinguishing_prefixes

ALGOS = ("ms", "pdms", "rquick", "rquick+")
REPORT_SCHEMA = "dstrsort.report/1"


@dataclass(frozen=True)
class RunConfig:
    algo: str = "ms"
    p: int = 4
    levels: int = 1
    schedule: tuple[int, ...] | None = None
    sampling: str = "string"
    sampling_factor: int | None = None
    assignment: str = "grid"
    compress_lcp: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def ms_config(self) -> MsConfig:
        mode = "character" if self.sampling in ("char", "character") else self.sampling
        return MsConfig(levels=self.levels, schedule=self.schedule,
                        sampling=SamplingConfig(mode, self.sampling_factor),
                        assignment=self.assignment, lcp_compression=self.compress_lcp, seed=self.seed)


def distribute(strings: Sequence[bytes], p: int) -> list[list[bytes]]:
    """Contiguous blocks of near-equal size."""
    n = len(strings)
    return [list(strings[i * n // p:(i + 1) * n // p]) for i in range(p)]


@dataclass
class Outcome:
    config: RunConfig
    machine: Machine
    output: list[bytes] | None  # sorted strings (ms, rquick)
    perm: list[int] | None  # ranks (pdms)
    runs: list[SortedRun]
    detail: MsResult | PdmsResult | None
    correct: bool | None = None


def run(strings: Sequence[bytes], cfg: RunConfig, verify: bool = True, oracle: SortedRun | None = None) -> Outcome:
    strings = as_strings(strings)
    machine = Machine(cfg.p, seed=cfg.seed)
    parts = distribute(strings, cfg.p)
    if cfg.algo == "ms":
        res = ms_sort(machine, parts, cfg.ms_config())
        out = Outcome(cfg, machine, res.strings(), None, res.runs, res)
    elif cfg.algo == "pdms":
        res = pdms_sort(machine, parts, PdmsConfig(cfg.ms_config()))
        out = Outcome(cfg, machine, None, res.perm, res.ms.runs, res)
    else:
        rq = rquick_sort(machine, parts, plus=cfg.algo == "rquick+")
        out = Outcome(cfg, machine, [s for r in rq.runs for s in r.strings], None, rq.runs, None)
    if verify:
        out.correct = check(strings, out, oracle)
    return out


def check(strings: Sequence[bytes], out: Outcome, oracle: SortedRun | None = None) -> bool:
    if oracle is None:
        oracle = oracle_sort(strings)
    if out.perm is not None:
        return out.perm == oracle.ids
    return out.output == oracle.strings


def metrics(out: Outcome) -> dict[str, Any]:
    led = out.machine.ledger
    if out.config.algo in ("ms", "pdms"):
        moved = led.total("bytes_sent", is_exchange_phase)
        phases = len(led.select(is_exchange_phase))
    else:
        moved = led.total("bytes_sent")
        phases = 0
    n = sum(len(r) for r in out.runs)
    return {
        "bytes_exchange": moved,
        "msgs_max_pe": max(led.per_pe("msgs_sent"), default=0),
        "supersteps": led.supersteps(),
        "max_strings_pe": max((len(r) for r in out.runs), default=0),
        "max_chars_pe": max((r.total_chars for r in out.runs), default=0),
        "exchange_phases": phases,
        "bytes_per_string": round(moved / n, 3) if n else 0.0,
    }


def exact_prefix_lengths(oracle: SortedRun) -> list[int]:
    """d(s) for every input index."""
    dl = distinguishing_prefixes(oracle).lengths
    d = [0] * len(dl)
    for rank, i in enumerate(oracle.ids):
        d[i] = dl[rank]
    return d


def overshoot_summary(approx: Sequence[int], exact: Sequence[int], p: int, sigma: int) -> dict[str, Any]:
    """Mean approx/exact ratio, split at d = log p / log sigma. Strings
    below the split have no constant-factor guarantee, so they are kept
    apart from the rest."""
    cut = math.log2(max(p, 2)) / math.log2(sigma)
    short = [a / d for a, d in zip(approx, exact) if d < cut]
    rest = [a / d for a, d in zip(approx, exact) if d >= cut]
    return {
        "split_at": round(cut, 6),
        "short": {"n": len(short), "mean_ratio": round(sum(short) / len(short), 6) if short else None},
        "rest": {"n": len(rest), "mean_ratio": round(sum(rest) / len(rest), 6) if rest else None},
    }


def report(strings: Sequence[bytes], out: Outcome, oracle: SortedRun | None = None) -> dict[str, Any]:
    strings = as_strings(strings)
    if oracle is None:
        oracle = oracle_sort(strings)
    N = sum(map(len, strings))
    exact = exact_prefix_lengths(oracle)
    dn_measured = sum(exact) / N if N else 0.0
    cfg = asdict(out.config)
    cfg["schedule"] = list(out.config.schedule) if out.config.schedule else None
    rep: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "config": cfg,
        "verdict": {"correct": out.correct, "checked_against": "sequential oracle"},
        "input": {"n": len(strings), "N": sum(map(len, strings)), "dn_measured": round(dn_measured, 6)},
        "metrics": metrics(out),
        "ledger": out.machine.ledger.to_json(),
    }
    ms = out.detail.ms if isinstance(out.detail, PdmsResult) else out.detail
    if isinstance(ms, MsResult):
        rep["schedule"] = list(ms.schedule)
        rep["levels"] = [_rounded(asdict(x)) for x in level_balance_report(ms)]
    if isinstance(out.detail, PdmsResult):
        d = out.detail.doubling
        rep["doubling"] = {
            "init_len": d.init_len,
            "rounds": [asdict(x) for x in d.rounds],
            "approx_total": sum(sum(x) for x in d.lengths),
            "overshoot": overshoot_summary([x for part in d.lengths for x in part], exact, out.config.p,
                                           d.sigma),
        }
    return rep


def _rounded(d: dict) -> dict:
    return {k: round(v, 3) if isinstance(v, float) else v for k, v in d.items()}


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def applicable_levels(p: int, kmax: int = 3) -> list[int]:
    """Level counts up to kmax whose default schedule has no factor 1."""
    from .partition import factorize
    return list(range(1, min(kmax, max(1, len(factorize(p)))) + 1))
