"""Command-line interface.

JSON goes to stdout, diagnostics to stderr. Exit status is 0 unless a fatal
error stopped the command (bad arguments, unreadable input, unusable store).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from verbmem import consolidator, engram, predictive
from verbmem.config import EngineConfig, load_config
from verbmem.engine import _DEFAULT_RERANKER, ingest, query, run_batch
from verbmem.errors import MemoryStoreError
from verbmem.models import EventInput
from verbmem.substrate import open_store, rebuild_episodes, stats

log = logging.getLogger("verbmem")


class CliError(Exception):
    """Fatal error: reported on stderr, exit status 2."""


def _emit(payload: Any, fmt: str = "json") -> None:
    if fmt == "table" and isinstance(payload, list):
        for row in payload:
            print("\t".join(str(row[k]) for k in row))
    elif fmt == "table" and isinstance(payload, dict):
        for key, value in payload.items():
            print(f"{key}\t{value}")
    else:
        print(json.dumps(payload, sort_keys=False))


def _config(args: argparse.Namespace) -> EngineConfig:
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load config {args.config}: {exc}") from exc
    gate = getattr(args, "gate", None)
    if gate == "off":
        config.gate = dataclasses.replace(config.gate, tau=None)
    elif gate == "on" and config.gate.disabled:
        config.gate = dataclasses.replace(config.gate, tau=0.30)
    return config


def _open(args: argparse.Namespace, config: EngineConfig):
    try:
        return open_store(args.store, config.embedder)
    except (MemoryStoreError, OSError, KeyError) as exc:
        raise CliError(f"cannot open store {args.store}: {exc}") from exc


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _config(args)
    try:
        fh = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from exc
    store = _open(args, config)
    admitted = rejected = 0
    errors = []
    try:
        with fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    event_input = EventInput.from_dict(json.loads(line))
                except (ValueError, TypeError) as exc:
                    errors.append({"line": lineno, "error": str(exc)})
                    print(f"line {lineno}: {exc}", file=sys.stderr)
                    continue
                result = ingest(store, event_input, config.gate, config.salience)
                if result.admitted:
                    admitted += 1
                else:
                    rejected += 1
    finally:
        store.close()
    _emit({"admitted": admitted, "rejected": rejected, "errors": errors})
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.k > config.fusion.final_k:
        raise CliError(f"--k must not exceed final_k={config.fusion.final_k}")
    if args.k < 1:
        raise CliError("--k must be at least 1")
    store = _open(args, config)
    try:
        results = query(store, args.text, args.k, config, reranker=None if args.no_rerank else _DEFAULT_RERANKER)
    finally:
        store.close()
    _emit([r.to_dict() for r in results], args.format)
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _open(args, config)
    try:
        report = run_batch(store, config)
    finally:
        store.close()
    _emit(report, args.format)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _open(args, config)
    try:
        report = stats(store)
    finally:
        store.close()
    _emit(report, args.format)
    return 0


def cmd_consolidate(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _open(args, config)
    try:
        rebuild_episodes(store)
        summaries, contradictions, timeline = consolidator.consolidate(store, args.window)
    finally:
        store.close()
    _emit({"summaries": len(summaries), "contradictions": len(contradictions), "timeline_assertions": len(timeline)},
          args.format)
    return 0


def cmd_build_surprise(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _open(args, config)
    try:
        scored = predictive.build_surprise_index(store, config.predictive)
    finally:
        store.close()
    _emit({"surprise_scored": scored}, args.format)
    return 0


def cmd_update_engrams(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _open(args, config)
    try:
        refreshed = engram.update_engrams(store)
    finally:
        store.close()
    _emit({"engrams_refreshed": refreshed}, args.format)
    return 0


def _figure_path(csv_path: Path, explicit: Optional[str], disabled: bool) -> Optional[Path]:
    if disabled:
        return None
    return Path(explicit) if explicit else csv_path.with_suffix(".png")


def cmd_bench_generate(args: argparse.Namespace) -> int:
    from verbmem.bench.corpus import generate_corpus, save_corpus

    try:
        corpus = generate_corpus(args.seed, args.events, args.queries, args.speakers)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    events_path, queries_path = save_corpus(corpus, args.out)
    _emit({"events": str(events_path), "queries": str(queries_path), "n_events": len(corpus.events),
           "n_queries": len(corpus.queries), "n_sessions": corpus.n_sessions, "seed": corpus.seed})
    return 0


def _load(directory: str):
    from verbmem.bench.corpus import load_corpus

    try:
        return load_corpus(directory)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load corpus {directory}: {exc}") from exc


def cmd_bench_eval(args: argparse.Namespace) -> int:
    from verbmem.bench.evaluate import ingest_corpus, per_query_rows, run_queries
    from verbmem.bench.grid import RERANKERS, write_csv
    from verbmem.bench.metrics import retrieval_metrics

    corpus = _load(args.corpus)
    config = _config(args)
    if args.embedder:
        config.embedder = args.embedder
    store = open_store(":memory:", config.embedder)
    try:
        ingest_corpus(store, corpus)
        runs = run_queries(store, corpus, args.k, config, reranker=RERANKERS[args.reranker](store))
    finally:
        store.close()
    rows = per_query_rows(corpus, runs, args.k)
    metrics = retrieval_metrics(runs, [rel for _, rel in corpus.queries], args.k)
    report: dict[str, Any] = {"embedder": config.embedder, "reranker": args.reranker, "k": args.k, **metrics}
    if args.out:
        csv_path = write_csv(rows, args.out, ("query", "relevant", "retrieved", "recall_at_k", "reciprocal_rank"))
        report["csv"] = str(csv_path)
        figure = _figure_path(csv_path, args.plot, args.no_plot)
        if figure:
            from verbmem.plotting import plot_eval
            report["figure"] = str(plot_eval(rows, figure))
    _emit(report)
    return 0


def cmd_bench_sweep(args: argparse.Namespace) -> int:
    from verbmem.bench.grid import write_csv
    from verbmem.bench.sweep import DEFAULT_TAUS, best, default_grid, labeled_stream, sweep_gate

    if args.input:
        stream = []
        with open(args.input, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    row = json.loads(line)
                    if "text" not in row or row.get("label") not in (0, 1):
                        raise CliError(f"{args.input} line {lineno}: need 'text' and a 0/1 'label'")
                    stream.append((row["text"], row["label"]))
    else:
        stream = labeled_stream(args.seed, args.n)
    taus = tuple(args.tau) if args.tau else DEFAULT_TAUS
    results = sweep_gate([t for t, _ in stream], [l for _, l in stream], default_grid(taus=taus))
    rows = [r.to_row() for r in results]
    top = best(results)
    report: dict[str, Any] = {
        "n_messages": len(stream), "n_keep": sum(l for _, l in stream), "grid_points": len(results),
        "best": top.to_row() if top else None,
    }
    if args.out:
        columns = ("lambda_n", "lambda_s", "lambda_pi", "tau", "auc", "admit_rate", "accuracy")
        csv_path = write_csv(rows, args.out, columns)
        report["csv"] = str(csv_path)
        figure = _figure_path(csv_path, args.plot, args.no_plot)
        if figure:
            from verbmem.plotting import plot_sweep
            defaults = load_config().gate
            report["figure"] = str(plot_sweep(rows, figure, (defaults.lambda_n, defaults.lambda_s, defaults.lambda_pi)))
    _emit(report)
    return 0


def cmd_bench_grid(args: argparse.Namespace) -> int:
    from verbmem.bench.grid import GRID_COLUMNS, run_grid, write_csv

    corpus = _load(args.corpus)
    try:
        cells = run_grid(corpus, args.embedders, args.rerankers, k=10, workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rows = [c.to_row() for c in cells]
    report: dict[str, Any] = {"cells": rows}
    if args.out:
        csv_path = write_csv(rows, args.out, GRID_COLUMNS)
        report["csv"] = str(csv_path)
        figure = _figure_path(csv_path, args.plot, args.no_plot)
        if figure:
            from verbmem.plotting import plot_grid
            report["figure"] = str(plot_grid(rows, figure))
    _emit(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verbmem", description="Local conversational memory engine.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def store_cmd(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--store", required=True, help="store file path")
        p.add_argument("--config", help="INI config file")
        p.add_argument("--format", choices=("json", "table"), default="json")
        p.set_defaults(func=func)
        return p

    p = store_cmd("ingest", cmd_ingest, "ingest a JSON Lines event file ('-' for stdin)")
    p.add_argument("--input", required=True)
    p.add_argument("--gate", choices=("on", "off"), help="override the config's gate setting")
    p = store_cmd("query", cmd_query, "ranked retrieval")
    p.add_argument("text")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--no-rerank", action="store_true", help="skip the reranking stage")
    store_cmd("batch", cmd_batch, "episodes, consolidation, surprise index, engrams")
    store_cmd("stats", cmd_stats, "store statistics")
    p = store_cmd("consolidate", cmd_consolidate, "summaries, contradictions, timeline")
    p.add_argument("--window", type=int, help="consolidate the last N messages")
    store_cmd("build-surprise", cmd_build_surprise, "rebuild per-event surprise scores")
    store_cmd("update-engrams", cmd_update_engrams, "refresh per-speaker profiles and style vectors")

    bench = sub.add_parser("bench", help="evaluation harness").add_subparsers(dest="bench_command", required=True)

    def report_opts(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--plot", help="figure path (default: CSV path with .png)")
        p.add_argument("--no-plot", action="store_true")

    p = bench.add_parser("generate", help="write a synthetic corpus directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=200)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench_generate)

    p = bench.add_parser("eval", help="recall@k and MRR on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--embedder")
    p.add_argument("--reranker", choices=("none", "identity", "idf-overlap"), default="idf-overlap")
    p.add_argument("--config")
    report_opts(p)
    p.set_defaults(func=cmd_bench_eval)

    p = bench.add_parser("sweep", help="gate weight sweep with AUC")
    p.add_argument("--input", help="JSONL with text and 0/1 label (default: synthetic stream)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--tau", type=float, action="append")
    report_opts(p)
    p.set_defaults(func=cmd_bench_sweep, config=None)

    p = bench.add_parser("grid", help="embedder x reranker retrieval grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embedders", nargs="+")
    p.add_argument("--rerankers", nargs="+")
    p.add_argument("--workers", type=int, default=1)
    report_opts(p)
    p.set_defaults(func=cmd_bench_grid)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MemoryStoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
