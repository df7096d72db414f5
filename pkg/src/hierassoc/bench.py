"""Shared-nothing streaming-update benchmark.

Every worker owns a private hierarchy and a private stream (seeded from the
global seed and its index). Workers pre-generate their batches, meet at a
barrier, then insert; only the insert loop is timed. The aggregate rate is
total updates divided by the longest worker span, i.e. the wall-clock rate of
all workers running at once.
"""
from __future__ import annotations

import csv
import io
import json
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from multiprocessing import Manager
from typing import Sequence

import numpy as np

from .assoc import AssociativeArray, TripleBatch
from .hier import CutSchedule, HierarchicalArray
from .stream_gen import StreamConfig, gen_batch, mix_seed

__all__ = [
    "MODES",
    "CSV_FIELDS",
    "BenchConfig",
    "WorkerRecord",
    "AggregateRecord",
    "BenchReport",
    "BenchError",
    "VerificationError",
    "run_worker",
    "run_bench",
    "aggregate",
    "sweep",
    "sweep_table",
    "physical_cores",
]

MODES = ("hierarchical", "flat")
CSV_FIELDS = ("workers", "updates", "span_s", "rate_per_s", "mode", "cuts")

_BARRIER_TIMEOUT_S = 600


class BenchError(RuntimeError):
    """A worker failed; the message carries every worker's diagnostic."""


class VerificationError(BenchError):
    """A worker's final array disagreed with the flat fold of its stream."""


@dataclass(frozen=True)
class BenchConfig:
    workers: int = 1
    stream: StreamConfig = field(default_factory=lambda: StreamConfig.sized(10**6, 10**5))
    schedule: CutSchedule = field(default_factory=CutSchedule)
    mode: str = "hierarchical"
    warmup_batches: int = 0
    verify: bool = False
    # Run even a single worker in its own process, away from the caller's heap.
    isolate: bool = False
    # Test hook: perturb each worker's store before verification.
    inject_fault: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 <= self.warmup_batches < self.stream.num_batches:
            raise ValueError("warmup_batches must be in [0, stream.num_batches)")

    @property
    def effective_schedule(self) -> CutSchedule:
        return CutSchedule(()) if self.mode == "flat" else self.schedule

    def to_dict(self) -> dict:
        return {
            "workers": self.workers,
            "stream": asdict(self.stream),
            "cuts": list(self.effective_schedule.cuts),
            "mode": self.mode,
            "warmup_batches": self.warmup_batches,
            "verify": self.verify,
        }


@dataclass(frozen=True)
class WorkerRecord:
    index: int
    updates: int
    span_s: float
    rate_per_s: float
    warmup_updates: int = 0
    verified: bool | None = None


@dataclass(frozen=True)
class AggregateRecord:
    workers: int
    updates: int
    span_s: float
    rate_per_s: float


def _cuts_text(schedule: CutSchedule) -> str:
    return ";".join(str(c) for c in schedule.cuts)


@dataclass
class BenchReport:
    config: BenchConfig
    workers: list[WorkerRecord]
    aggregate: AggregateRecord
    environment: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "workers": [asdict(w) for w in self.workers],
            "aggregate": {
                "updates": self.aggregate.updates,
                "span_s": self.aggregate.span_s,
                "rate_per_s": self.aggregate.rate_per_s,
            },
            "environment": self.environment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_rows(self) -> list[dict]:
        """One row per worker (``workers`` = ``worker-<i>``) then the aggregate row."""
        mode, cuts = self.config.mode, _cuts_text(self.config.effective_schedule)
        rows = [
            {"workers": f"worker-{w.index}", "updates": w.updates, "span_s": w.span_s,
             "rate_per_s": w.rate_per_s, "mode": mode, "cuts": cuts}
            for w in self.workers
        ]
        a = self.aggregate
        rows.append({"workers": a.workers, "updates": a.updates, "span_s": a.span_s,
                     "rate_per_s": a.rate_per_s, "mode": mode, "cuts": cuts})
        return rows

    def to_csv(self, header: bool = True) -> str:
        return _write_csv(self.csv_rows(), header)


def _write_csv(rows, header=True) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    if header:
        writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def physical_cores() -> int:
    try:
        import psutil

        n = psutil.cpu_count(logical=False)
    except ImportError:
        n = None
    return n or os.cpu_count() or 1


def _environment() -> dict:
    return {
        "host": platform.node(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpus": os.cpu_count(),
    }


def worker_stream(cfg: BenchConfig, index: int) -> StreamConfig:
    return cfg.stream.with_seed(mix_seed(cfg.stream.seed, index))


def run_worker(cfg: BenchConfig, index: int, barrier=None) -> WorkerRecord:
    """One worker's full run: generate, (sync), insert with timing, verify."""
    stream = worker_stream(cfg, index)
    batches = [gen_batch(stream, i) for i in range(stream.num_batches)]
    store = HierarchicalArray(cfg.effective_schedule)
    if barrier is not None:
        barrier.wait(_BARRIER_TIMEOUT_S)

    warm = batches[: cfg.warmup_batches]
    timed = batches[cfg.warmup_batches :]
    for b in warm:
        store.insert_batch(b)
    start = time.perf_counter()
    for b in timed:
        store.insert_batch(b)
    span = time.perf_counter() - start
    updates = sum(len(b) for b in timed)

    verified = None
    if cfg.verify:
        if cfg.inject_fault:
            store.insert_batch([("__fault__", "__fault__", 1)])
        oracle = AssociativeArray.from_triples(TripleBatch.concat(batches))
        verified = store.materialize() == oracle
    return WorkerRecord(
        index=index,
        updates=updates,
        span_s=span,
        rate_per_s=updates / span,
        warmup_updates=sum(len(b) for b in warm),
        verified=verified,
    )


def _pool_worker(cfg: BenchConfig, index: int, barrier):
    try:
        return run_worker(cfg, index, barrier)
    except BaseException:
        # release the others instead of leaving them parked at the barrier
        barrier.abort()
        raise


def _failure_text(index: int, exc: BaseException) -> str:
    text = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return f"worker {index}: {text}"


def run_bench(cfg: BenchConfig) -> BenchReport:
    if cfg.workers == 1 and not cfg.isolate:
        try:
            records = [run_worker(cfg, 0)]
        except Exception as exc:
            raise BenchError(_failure_text(0, exc)) from exc
    else:
        records, failures = [], []
        with Manager() as manager, ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            barrier = manager.Barrier(cfg.workers)
            futures = [pool.submit(_pool_worker, cfg, i, barrier) for i in range(cfg.workers)]
            for i, fut in enumerate(futures):
                try:
                    records.append(fut.result())
                except Exception as exc:
                    failures.append((i, exc))
        if failures:
            # a broken barrier is a symptom; report the root causes first
            failures.sort(key=lambda f: type(f[1]).__name__ == "BrokenBarrierError")
            raise BenchError("; ".join(_failure_text(i, e) for i, e in failures))

    bad = [r.index for r in records if r.verified is False]
    if bad:
        raise VerificationError(
            "; ".join(f"worker {i}: materialized array differs from the flat fold of its stream" for i in bad)
        )
    return BenchReport(cfg, records, aggregate(records), _environment())


def aggregate(records: Sequence) -> AggregateRecord:
    """Total updates over the longest span; ``records`` need ``updates`` and ``span_s``."""
    records = list(records)
    if not records:
        raise ValueError("aggregate needs at least one worker record")

    def get(r, name):
        return r[name] if isinstance(r, dict) else getattr(r, name)

    total = sum(int(get(r, "updates")) for r in records)
    span = max(float(get(r, "span_s")) for r in records)
    return AggregateRecord(workers=len(records), updates=total, span_s=span, rate_per_s=total / span)


def sweep(worker_counts: Sequence[int], base: BenchConfig) -> list[BenchReport]:
    """Weak-scaling sweep: the per-worker workload stays fixed as workers grow."""
    counts = list(worker_counts)
    if not counts or any(c < 1 for c in counts) or any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError(f"worker counts must be positive and strictly ascending, got {counts}")
    reports = []
    for n in counts:
        try:
            reports.append(run_bench(replace(base, workers=n)))
        except BenchError as exc:
            raise type(exc)(f"sweep at workers={n}: {exc}") from exc
    return reports


def sweep_table(reports: Sequence[BenchReport], per_worker: bool = False) -> str:
    """CSV for a rate-vs-workers plot; aggregate rows only unless ``per_worker``."""
    rows = []
    for rep in reports:
        rows.extend(rep.csv_rows() if per_worker else rep.csv_rows()[-1:])
    return _write_csv(rows)
