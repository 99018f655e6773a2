"""BM25 full-text index over event text.

Postings live in the store file (``lex_postings``); document lengths are kept
on the message row. Scoring is Okapi BM25 with k1=1.2, b=0.75 and the
non-negative IDF ``ln(1 + (N - df + 0.5) / (df + 0.5))``. Query tokens are
OR-combined; a repeated query token counts once.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional

from verbmem.text import tokenize

if TYPE_CHECKING:
    from verbmem.models import Event
    from verbmem.substrate import Store

K1 = 1.2
B = 0.75


@dataclass(frozen=True)
class LexicalHit:
    event_id: int
    bm25_score: float
    rank: int


def idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def term_weight(tf: int, doc_len: int, avg_len: float, k1: float = K1, b: float = B) -> float:
    norm = 1.0 - b + b * (doc_len / avg_len if avg_len > 0 else 0.0)
    return tf * (k1 + 1.0) / (tf + k1 * norm)


def query_terms(query_text: str) -> list[str]:
    return list(dict.fromkeys(tokenize(query_text)))


def index_text(store: "Store", event: "Event") -> None:
    counts = Counter(tokenize(event.text))
    store.conn.executemany(
        "INSERT INTO lex_postings(term, event_id, tf) VALUES (?, ?, ?)",
        [(term, event.id, tf) for term, tf in counts.items()],
    )
    store.conn.execute("UPDATE messages SET token_count = ? WHERE id = ?", (sum(counts.values()), event.id))


def corpus_stats(store: "Store") -> tuple[int, float]:
    n, total = store.conn.execute("SELECT COUNT(*), COALESCE(SUM(token_count), 0) FROM messages").fetchone()
    return n, (total / n if n else 0.0)


def document_frequencies(store: "Store", terms: Iterable[str]) -> dict[str, int]:
    out = {}
    for term in terms:
        out[term] = store.conn.execute("SELECT COUNT(*) FROM lex_postings WHERE term = ?", (term,)).fetchone()[0]
    return out


def search_lexical(
    store: "Store",
    query_text: str,
    k: int,
    *,
    restrict_to: Optional[set[int]] = None,
) -> list[LexicalHit]:
    """Top-``k`` events by BM25; ties broken by ascending event id.

    ``restrict_to`` limits scoring to the given event ids (ranks stay contiguous).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = query_terms(query_text)
    if not terms:
        return []
    n_docs, avg_len = corpus_stats(store)
    if n_docs == 0:
        return []
    scores: dict[int, float] = {}
    lengths: dict[int, int] = {}
    for term in terms:
        rows = store.conn.execute(
            "SELECT p.event_id, p.tf, m.token_count FROM lex_postings p "
            "JOIN messages m ON m.id = p.event_id WHERE p.term = ?",
            (term,),
        ).fetchall()
        if not rows:
            continue
        w_idf = idf(n_docs, len(rows))
        for event_id, tf, dl in rows:
            if restrict_to is not None and event_id not in restrict_to:
                continue
            lengths[event_id] = dl
            scores[event_id] = scores.get(event_id, 0.0) + w_idf * term_weight(tf, dl, avg_len)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return [LexicalHit(event_id=eid, bm25_score=s, rank=i) for i, (eid, s) in enumerate(ranked, start=1)]
