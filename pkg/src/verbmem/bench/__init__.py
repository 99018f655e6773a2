"""Desk-scale evaluation harness: synthetic corpora, retrieval metrics, gate sweep, ablation grid."""

from verbmem.bench.corpus import SyntheticCorpus, generate_corpus, load_corpus, save_corpus
from verbmem.bench.evaluate import eval_retrieval, ingest_corpus
from verbmem.bench.grid import GridCell, run_grid
from verbmem.bench.metrics import auc_all_pairs, auc_rank_sum, retrieval_metrics, wilson_interval
from verbmem.bench.sweep import SweepResult, default_grid, labeled_stream, stream_signals, sweep_gate

__all__ = [
    "GridCell", "SweepResult", "SyntheticCorpus", "auc_all_pairs", "auc_rank_sum", "default_grid",
    "eval_retrieval", "generate_corpus", "ingest_corpus", "labeled_stream", "load_corpus",
    "retrieval_metrics", "run_grid", "save_corpus", "stream_signals", "sweep_gate", "wilson_interval",
]
