import csv
import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierassoc import AssociativeArray, CutSchedule, TripleBatch
from hierassoc import bench as bench_mod
from hierassoc.bench import (
    CSV_FIELDS,
    AggregateRecord,
    BenchConfig,
    BenchError,
    VerificationError,
    WorkerRecord,
    aggregate,
    run_bench,
    sweep,
    sweep_table,
    worker_stream,
)
from hierassoc.stream_gen import StreamConfig, gen_batch, iter_batches


def small(workers=1, entries=20_000, batch=2_000, **kw):
    return BenchConfig(
        workers=workers,
        stream=StreamConfig.sized(entries, batch, vertex_count=5_000),
        schedule=CutSchedule((500, 4_000)),
        **kw,
    )


def test_single_worker_million():
    cfg = BenchConfig(
        workers=1,
        stream=StreamConfig.sized(10**6, 10**5),
        schedule=CutSchedule((2**15, 2**19)),
        verify=True,
    )
    rep = run_bench(cfg)
    assert rep.aggregate.updates == 10**6
    assert rep.workers[0].updates == 10**6
    assert rep.workers[0].verified is True
    assert rep.aggregate.rate_per_s > 0 and math.isfinite(rep.aggregate.rate_per_s)


def test_four_workers_conserve_updates():
    cfg = BenchConfig(workers=4, stream=StreamConfig.sized(10**6, 10**5), schedule=CutSchedule((2**15, 2**19)))
    rep = run_bench(cfg)
    assert rep.aggregate.updates == 4 * 10**6
    assert sorted(w.index for w in rep.workers) == [0, 1, 2, 3]
    assert all(w.updates == 10**6 for w in rep.workers)


def test_aggregate_arithmetic():
    two = [WorkerRecord(0, 10**6, 2.0, 5e5), WorkerRecord(1, 10**6, 2.0, 5e5)]
    assert aggregate(two) == AggregateRecord(workers=2, updates=2 * 10**6, span_s=2.0, rate_per_s=1e6)
    uneven = [{"updates": 10**6, "span_s": 1.0}, {"updates": 10**6, "span_s": 4.0}]
    assert aggregate(uneven).rate_per_s == 2 * 10**6 / 4.0 == 5e5


def test_aggregate_single_is_identity():
    w = WorkerRecord(0, 123_456, 0.75, 123_456 / 0.75)
    a = aggregate([w])
    assert (a.updates, a.span_s, a.rate_per_s) == (w.updates, w.span_s, w.rate_per_s)


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])


@given(st.lists(st.tuples(st.integers(1, 10**9), st.floats(1e-3, 1e3)), min_size=1, max_size=20))
def test_aggregate_invariants(pairs):
    recs = [WorkerRecord(i, u, s, u / s) for i, (u, s) in enumerate(pairs)]
    a = aggregate(recs)
    assert a.updates == sum(u for u, _ in pairs)
    assert a.rate_per_s <= sum(r.rate_per_s for r in recs) * (1 + 1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        small(workers=0)
    with pytest.raises(ValueError):
        small(warmup_batches=10)
    with pytest.raises(ValueError):
        small(mode="sideways")


def test_warmup_is_untimed_and_accounted():
    rep = run_bench(small(warmup_batches=4, verify=True))
    w = rep.workers[0]
    assert w.warmup_updates == 4 * 2_000
    assert w.updates == 6 * 2_000
    assert w.verified is True


def test_flat_mode_uses_single_layer():
    cfg = small(mode="flat", verify=True)
    assert cfg.effective_schedule.cuts == ()
    rep = run_bench(cfg)
    assert rep.workers[0].verified is True
    assert rep.to_dict()["config"]["cuts"] == []


def test_worker_streams_are_distinct_and_deterministic():
    cfg = small(workers=3)
    streams = [worker_stream(cfg, i) for i in range(3)]
    assert len({s.seed for s in streams}) == 3
    assert worker_stream(cfg, 1) == streams[1]
    assert list(gen_batch(streams[0], 0)) != list(gen_batch(streams[1], 0))


def test_verification_against_flat_fold():
    cfg = small(workers=1, verify=True)
    rep = run_bench(cfg)
    stream = worker_stream(cfg, 0)
    assert rep.workers[0].verified
    # the oracle the harness uses, rebuilt independently here
    assert AssociativeArray.from_triples(TripleBatch.concat(iter_batches(stream))).nnz > 0


@pytest.mark.parametrize("workers", [1, 2])
def test_injected_fault_fails_verification(workers):
    with pytest.raises(VerificationError) as info:
        run_bench(small(workers=workers, verify=True, inject_fault=True))
    assert "worker 0" in str(info.value)


def test_worker_failure_reports_worker(monkeypatch):
    real = bench_mod.run_worker

    def flaky(cfg, index, barrier=None):
        if index == 1:
            raise RuntimeError("disk on fire")
        return real(cfg, index, barrier)

    monkeypatch.setattr(bench_mod, "run_worker", flaky)
    with pytest.raises(BenchError) as info:
        run_bench(small(workers=2))
    assert "worker 1" in str(info.value) and "disk on fire" in str(info.value)


def test_single_worker_failure(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("nope")

    monkeypatch.setattr(bench_mod, "gen_batch", boom)
    with pytest.raises(BenchError, match="worker 0: RuntimeError: nope"):
        run_bench(small())


def test_sweep_weak_scaling_conservation():
    reports = sweep([1, 2, 4], small())
    assert [r.aggregate.workers for r in reports] == [1, 2, 4]
    assert [r.aggregate.updates for r in reports] == [20_000, 40_000, 80_000]
    table = list(csv.DictReader(io.StringIO(sweep_table(reports))))
    assert [row["workers"] for row in table] == ["1", "2", "4"]


def test_sweep_single_matches_run_bench():
    (rep,) = sweep([1], small())
    direct = run_bench(small())
    assert rep.config == direct.config
    assert [w.updates for w in rep.workers] == [w.updates for w in direct.workers]


@pytest.mark.parametrize("counts", [[], [2, 1], [0, 1], [1, 1]])
def test_sweep_rejects_bad_counts(counts):
    with pytest.raises(ValueError):
        sweep(counts, small())


def test_sweep_identifies_failing_count():
    with pytest.raises(VerificationError, match="workers=1"):
        sweep([1, 2], small(verify=True, inject_fault=True))


def test_json_report_fields():
    rep = run_bench(small(workers=2))
    d = json.loads(rep.to_json())
    assert set(d) >= {"config", "workers", "aggregate", "environment"}
    assert set(d["aggregate"]) == {"updates", "span_s", "rate_per_s"}
    for w in d["workers"]:
        assert {"index", "updates", "span_s", "rate_per_s"} <= set(w)
    assert {"host", "timestamp"} <= set(d["environment"])
    assert d["config"]["workers"] == 2


def test_csv_report_rows():
    rep = run_bench(small(workers=2))
    text = rep.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_FIELDS) == "workers,updates,span_s,rate_per_s,mode,cuts"
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["workers"] for r in rows] == ["worker-0", "worker-1", "2"]
    assert int(rows[-1]["updates"]) == sum(int(r["updates"]) for r in rows[:-1])
    assert all(r["cuts"] == "500;4000" and r["mode"] == "hierarchical" for r in rows)


def test_isolated_single_worker_matches_inline():
    rep = run_bench(small(verify=True, isolate=True))
    assert rep.aggregate.updates == 20_000
    assert rep.workers[0].verified is True
