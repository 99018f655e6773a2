"""Embedder x reranker grid: one retrieval evaluation per cell."""

from __future__ import annotations

import csv
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from verbmem.bench.corpus import SyntheticCorpus
from verbmem.bench.evaluate import eval_retrieval, ingest_corpus
from verbmem.dense import EMBEDDERS
from verbmem.engine import default_reranker
from verbmem.fusion import IdentityReranker
from verbmem.substrate import Store, open_store

GRID_COLUMNS = ("embedder", "reranker", "recall_at_10", "mrr", "n_queries")

# name -> factory(store) returning a reranker or None (no reranking stage)
RERANKERS: dict[str, Callable[[Store], object]] = {
    "none": lambda store: None,
    "identity": lambda store: IdentityReranker(),
    "idf-overlap": default_reranker,
}


@dataclass(frozen=True)
class GridCell:
    embedder: str
    reranker: str
    recall_at_10: float
    mrr: float
    n_queries: int

    def to_row(self) -> dict:
        return {
            "embedder": self.embedder, "reranker": self.reranker,
            "recall_at_10": round(self.recall_at_10, 12), "mrr": round(self.mrr, 12),
            "n_queries": self.n_queries,
        }


def _embedder_cells(corpus: SyntheticCorpus, embedder: str, rerankers: Sequence[str], workdir: Path, k: int) -> list[GridCell]:
    # each embedder gets its own store file; rerankers only read it
    store = open_store(workdir / f"{embedder}.db", embedder)
    try:
        ingest_corpus(store, corpus)
        cells = []
        for name in rerankers:
            metrics = eval_retrieval(store, corpus, k, reranker=RERANKERS[name](store))
            cells.append(GridCell(embedder, name, metrics["recall_at_k"], metrics["mrr"], metrics["n_queries"]))
        return cells
    finally:
        store.close()


def run_grid(
    corpus: SyntheticCorpus,
    embedders: Optional[Sequence[str]] = None,
    rerankers: Optional[Sequence[str]] = None,
    *,
    k: int = 10,
    workers: int = 1,
    workdir: Optional[str | Path] = None,
) -> list[GridCell]:
    """Evaluate every (embedder, reranker) pair; cells come back in row-major order."""
    embedders = list(embedders or EMBEDDERS)
    rerankers = list(rerankers or RERANKERS)
    unknown = [e for e in embedders if e not in EMBEDDERS] + [r for r in rerankers if r not in RERANKERS]
    if unknown:
        raise ValueError(f"unknown grid entries: {', '.join(unknown)}")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp_path = Path(tmp)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(lambda e: _embedder_cells(corpus, e, rerankers, tmp_path, k), embedders))
        else:
            chunks = [_embedder_cells(corpus, e, rerankers, tmp_path, k) for e in embedders]
    return [cell for chunk in chunks for cell in chunk]


def write_csv(rows: Sequence[dict], path: str | Path, columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path
