"""Command line: ``hierassoc {gen,load,query,bench,sweep}``.

Exit status: 0 success, 1 usage error, 2 data or verification error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from ._checked import ValueOverflowError
from .assoc import MalformedKeyError
from .bench import BenchConfig, BenchError, run_bench, sweep, sweep_table
from .hier import CutSchedule, HierarchicalArray
from .stream_gen import KEY_FORMATS, StreamConfig, iter_batches
from .tsv import TsvParseError, load_many, save_tsv

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cuts(text: str) -> CutSchedule:
    try:
        return CutSchedule.parse(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"invalid cut list {text!r}: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_bench_flags(p):
    p.add_argument("--entries-per-worker", type=int, default=10**6)
    p.add_argument("--batch-size", type=int, default=10**5)
    p.add_argument("--vertices", type=int, default=2**24)
    p.add_argument("--alpha", type=float, default=1.2)
    p.add_argument("--cuts", type=_cuts, default=CutSchedule())
    p.add_argument("--mode", choices=("hierarchical", "flat"), default="hierarchical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=int, default=0, help="untimed batches at the start of each stream")
    p.add_argument("--report", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--verify", action="store_true", help="check every worker against the flat fold of its stream")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hierassoc", description="Hierarchical associative arrays: streams, queries, benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a power-law edge stream as TSV batch files")
    p.add_argument("--entries", type=int, required=True)
    p.add_argument("--batch-size", type=int, default=10**5)
    p.add_argument("--vertices", type=int, default=2**24)
    p.add_argument("--alpha", type=float, default=1.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--key-format", choices=KEY_FORMATS, default="decimal")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("load", help="insert TSV files (one batch each) and print hierarchy stats")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="TSV files or directories")
    p.add_argument("--cuts", type=_cuts, default=CutSchedule())

    p = sub.add_parser("query", help="print the neighbours of a row key, sorted, one per line")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="TSV files or directories")
    p.add_argument("--row", required=True)
    p.add_argument("--cuts", type=_cuts, default=CutSchedule())

    p = sub.add_parser("bench", help="run the multi-worker update benchmark")
    p.add_argument("--workers", type=int, default=1)
    _add_bench_flags(p)

    p = sub.add_parser("sweep", help="run the benchmark for several worker counts")
    p.add_argument("--workers-list", type=_int_list, required=True)
    p.add_argument("--per-worker", action="store_true", help="include per-worker rows in CSV output")
    p.add_argument("--plot", help="also save a log-log rate-vs-workers plot (needs matplotlib)")
    _add_bench_flags(p)
    return parser


def _bench_config(args, workers: int) -> BenchConfig:
    stream = StreamConfig.sized(
        args.entries_per_worker,
        args.batch_size,
        vertex_count=args.vertices,
        alpha=args.alpha,
        seed=args.seed,
    )
    return BenchConfig(
        workers=workers,
        stream=stream,
        schedule=args.cuts,
        mode=args.mode,
        warmup_batches=args.warmup,
        verify=args.verify,
        inject_fault=args.inject_fault,
    )


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_hierarchy(args) -> HierarchicalArray:
    store = HierarchicalArray(args.cuts)
    for batch in load_many(args.inputs):
        store.insert_batch(batch)
    return store


def _plot(reports, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = [r.aggregate.workers for r in reports]
    rate = [r.aggregate.rate_per_s for r in reports]
    fig, ax = plt.subplots()
    ax.loglog(n, rate, "o-", label="measured")
    ax.loglog(n, [rate[0] * k / n[0] for k in n], "--", color="grey", label="linear")
    ax.set_xlabel("workers")
    ax.set_ylabel("updates / second")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def _run(args) -> int:
    if args.command == "gen":
        cfg = StreamConfig.sized(
            args.entries, args.batch_size, vertex_count=args.vertices, alpha=args.alpha,
            seed=args.seed, key_format=args.key_format,
        )
        os.makedirs(args.out_dir, exist_ok=True)
        width = len(str(cfg.num_batches - 1))
        total = 0
        for i, batch in enumerate(iter_batches(cfg)):
            total += save_tsv(batch, os.path.join(args.out_dir, f"batch-{i:0{width}d}.tsv"))
        print(f"wrote {total} triples in {cfg.num_batches} files to {args.out_dir}", file=sys.stderr)
        return EXIT_OK

    if args.command == "load":
        store = _load_hierarchy(args)
        st = store.stats()
        print(f"layers: {len(st.layer_nnz)}")
        print("layer_nnz: " + " ".join(map(str, st.layer_nnz)))
        print("cascades: " + " ".join(map(str, st.cascades)))
        print(f"lifetime_updates: {st.lifetime_updates}")
        print(f"nnz: {store.materialize().nnz}")
        return EXIT_OK

    if args.command == "query":
        hits = _load_hierarchy(args).query_neighbors(args.row)
        for key in hits.col_keys.tolist():
            print(key)
        return EXIT_OK

    if args.command == "bench":
        report = run_bench(args.config)
        _emit(report.to_json() + "\n" if args.report == "json" else report.to_csv(), args.out)
        return EXIT_OK

    if args.command == "sweep":
        reports = sweep(args.workers_list, args.config)
        if args.report == "json":
            text = json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
        else:
            text = sweep_table(reports, per_worker=args.per_worker)
        _emit(text, args.out)
        if args.plot:
            _plot(reports, args.plot)
        return EXIT_OK
    raise AssertionError(args.command)


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "bench":
            args.config = _bench_config(args, args.workers)
        elif args.command == "sweep":
            args.config = _bench_config(args, 1)
            counts = args.workers_list
            if any(c < 1 for c in counts) or any(b <= a for a, b in zip(counts, counts[1:])):
                raise ValueError(f"--workers-list must be positive and ascending, got {counts}")
        elif args.command == "gen":
            StreamConfig.sized(args.entries, args.batch_size, vertex_count=args.vertices, alpha=args.alpha,
                               key_format=args.key_format)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"hierassoc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK

    try:
        return _run(args)
    except (TsvParseError, MalformedKeyError, ValueOverflowError, OverflowError, OSError, BenchError) as exc:
        print(f"hierassoc: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
