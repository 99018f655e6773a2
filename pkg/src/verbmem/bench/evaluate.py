"""Ingest a corpus into a store and score retrieval against its relevance labels."""

from __future__ import annotations

import dataclasses
from typing import Any, Optional

from verbmem.bench.corpus import SyntheticCorpus
from verbmem.config import EngineConfig, load_config
from verbmem.engine import _DEFAULT_RERANKER, query
from verbmem.bench.metrics import reciprocal_rank, recall_at_k, retrieval_metrics
from verbmem.models import EventInput
from verbmem.substrate import Store, append_events


def ingest_corpus(store: Store, corpus: SyntheticCorpus) -> int:
    """Append every corpus event with the gate off; ids follow stream order on a fresh store."""
    if store.event_count():
        raise ValueError("corpus ingestion expects an empty store so ids match stream positions")
    events = append_events(store, [EventInput.from_dict(e) for e in corpus.events])
    return len(events)


def _config_for_k(config: Optional[EngineConfig], k: int) -> EngineConfig:
    config = config or load_config()
    if k > config.fusion.final_k:
        config = dataclasses.replace(config, fusion=dataclasses.replace(config.fusion, final_k=k))
    return config


def run_queries(
    store: Store,
    corpus: SyntheticCorpus,
    k: int = 10,
    config: Optional[EngineConfig] = None,
    *,
    reranker: Any = _DEFAULT_RERANKER,
) -> list[list[int]]:
    config = _config_for_k(config, k)
    return [[r.event.id for r in query(store, text, k, config, reranker=reranker)] for text, _ in corpus.queries]


def eval_retrieval(
    store: Store,
    corpus: SyntheticCorpus,
    k: int = 10,
    config: Optional[EngineConfig] = None,
    *,
    reranker: Any = _DEFAULT_RERANKER,
) -> dict[str, float]:
    """Mean recall@k and MRR of ``corpus.queries`` against an already ingested store."""
    runs = run_queries(store, corpus, k, config, reranker=reranker)
    return retrieval_metrics(runs, [rel for _, rel in corpus.queries], k)


def per_query_rows(corpus: SyntheticCorpus, runs: list[list[int]], k: int = 10) -> list[dict[str, Any]]:
    return [
        {
            "query": text,
            "relevant": " ".join(map(str, rel)),
            "retrieved": " ".join(map(str, run)),
            "recall_at_k": recall_at_k(run, rel, k),
            "reciprocal_rank": reciprocal_rank(run[:k], rel),
        }
        for (text, rel), run in zip(corpus.queries, runs)
    ]
