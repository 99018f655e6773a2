"""Stage-ordered ingestion, query and batch pipelines.

Ingestion: gate -> append (row + lexical + dense in one transaction).
Query: intent -> expansion hook -> lexical/dense (+ separation) candidates ->
RRF -> reweight -> pre-rerank window -> rerank -> top k.
Batch: episodes -> consolidate -> surprise index -> engrams.
"""

from __future__ import annotations

import calendar
import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from verbmem import consolidator, engram, predictive
from verbmem.config import EngineConfig, IntentConfig, load_config
from verbmem.dense import search_dense
from verbmem.fusion import Candidate, OverlapReranker, QueryIntent, Reranker, rerank, reweight, rrf_fuse
from verbmem.gate import GateConfig, gate_decide
from verbmem.lexical import corpus_stats, idf, search_lexical
from verbmem.models import Event, EventInput, GateSignals
from verbmem.salience import SalienceConfig, hybrid_salience
from verbmem.substrate import Store, append_event, get_events, open_store, rebuild_episodes, stats
from verbmem.text import MONTHS

logger = logging.getLogger(__name__)

DAY = 86400
TraceHook = Callable[[str, int, int], None]

_ISO_DATE = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_MONTH_DAY = re.compile(
    rf"\b({'|'.join(sorted(MONTHS, key=len, reverse=True))})\.?(?:\s+(\d{{1,2}})(?:st|nd|rd|th)?)?(?:,?\s+(\d{{4}}))?\b",
    re.IGNORECASE,
)
_YEAR = re.compile(r"\b(?:in|during|of)\s+((?:19|20)\d{2})\b", re.IGNORECASE)
_RELATIVE = (
    (re.compile(r"\byesterday\b"), 2 * DAY),
    (re.compile(r"\btoday\b"), DAY),
    (re.compile(r"\b(?:last|past|this)\s+week\b"), 7 * DAY),
    (re.compile(r"\b(?:last|past|this)\s+month\b"), 31 * DAY),
    (re.compile(r"\b(?:last|past|this)\s+year\b"), 366 * DAY),
)
_QUERY_STOP = frozenset(
    "I The A An What When Where Who Why How Which Did Does Do Is Are Was Were Can Could Would Should "
    "Tell Summarize Summarise Give List Show Has Have Please".split()
)


@dataclass(frozen=True)
class IngestResult:
    admitted: bool
    event: Optional[Event]
    signals: Optional[GateSignals]
    category: str


@dataclass(frozen=True)
class QueryResult:
    event: Event
    score: float
    injected: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "event_id": self.event.id,
            "text": self.event.text,
            "score": self.score,
            "modality": self.event.modality,
            "timestamp": self.event.timestamp,
        }


def _utc(ts: int) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


def _day_window(year: int, month: int, day: int) -> Optional[tuple[int, int]]:
    try:
        start = int(datetime(year, month, day, tzinfo=timezone.utc).timestamp())
    except ValueError:
        return None
    return start, start + DAY - 1


def _month_window(year: int, month: int) -> tuple[int, int]:
    start = int(datetime(year, month, 1, tzinfo=timezone.utc).timestamp())
    last = calendar.monthrange(year, month)[1]
    return start, start + last * DAY - 1


def time_window(query_text: str, now: Optional[int] = None) -> Optional[tuple[int, int]]:
    """Map the first time expression in the query to an inclusive ``[t0, t1]`` (UTC).

    Relative expressions ("yesterday", "last week", ...) and month names
    without a year need ``now``; absolute dates do not.
    """
    lowered = query_text.lower()
    m = _ISO_DATE.search(lowered)
    if m:
        return _day_window(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    for rx, span in _RELATIVE:
        if rx.search(lowered):
            return (max(0, now - span), now) if now is not None else None
    m = _MONTH_DAY.search(query_text)
    if m and not (m.group(1).lower() == "may" and not (m.group(2) or m.group(3))):
        month = MONTHS[m.group(1).lower()]
        year = int(m.group(3)) if m.group(3) else None
        if year is None:
            if now is None:
                return None
            ref = _utc(now)
            year = ref.year if month <= ref.month else ref.year - 1
        if m.group(2):
            return _day_window(year, month, int(m.group(2)))
        return _month_window(year, month)
    m = _YEAR.search(query_text)
    if m:
        year = int(m.group(1))
        return _month_window(year, 1)[0], _month_window(year, 12)[1]
    return None


def _has_phrase(lowered: str, phrases: Iterable[str]) -> bool:
    return any(re.search(rf"\b{re.escape(p)}\b", lowered) for p in phrases)


def focal_entity(query_text: str, known: Optional[Iterable[str]] = None) -> Optional[str]:
    """First capitalized name in the query; restricted to ``known`` entities when given."""
    names = []
    for m in re.finditer(r"\b([A-Z][\w-]*)(?:'s)?\b", query_text):
        word = m.group(1)
        if word not in _QUERY_STOP and word.lower() not in MONTHS:
            names.append(word)
    if known is None:
        return names[0] if names else None
    lookup = {k.casefold(): k for k in known}
    for name in names:
        if name.casefold() in lookup:
            return lookup[name.casefold()]
    return None


def detect_intent(
    query_text: str,
    now: Optional[int] = None,
    *,
    known_entities: Optional[Iterable[str]] = None,
    config: Optional[IntentConfig] = None,
) -> QueryIntent:
    config = config or IntentConfig()
    lowered = query_text.lower()
    window = time_window(query_text, now)
    temporal = window is not None or _has_phrase(lowered, config.temporal_phrases)
    if _has_phrase(lowered, config.detail_phrases):
        qtype = "detail"
    elif _has_phrase(lowered, config.synthesis_phrases):
        qtype = "synthesis"
    else:
        qtype = "general"
    return QueryIntent(
        temporal=temporal,
        personality=_has_phrase(lowered, config.personality_words),
        question_type=qtype,
        time_window=window,
        focal_entity=focal_entity(query_text, known_entities),
    )


def no_expansion(query_text: str) -> list[str]:
    """Default query-expansion hook: nothing beyond the original query."""
    return []


def _log_reject(path: str, event_input: EventInput, signals: Optional[GateSignals], category: str) -> None:
    record = {
        "text": event_input.text,
        "sender": event_input.sender,
        "timestamp": event_input.timestamp,
        "category": category,
        "signals": signals.to_dict() if signals else None,
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def ingest(
    store: Store,
    event_input: EventInput,
    gate_config: Optional[GateConfig] = None,
    salience_config: Optional[SalienceConfig] = None,
) -> IngestResult:
    gate_config = gate_config or GateConfig()
    admitted, signals, category = gate_decide(store, event_input, gate_config, salience_config)
    if not admitted:
        if gate_config.reject_log:
            _log_reject(gate_config.reject_log, event_input, signals, category)
        return IngestResult(False, None, signals, category)
    # the gate's classifier overrides the caller's category only when the gate ran
    event = append_event(store, event_input, signal_tags=signals, category=category if signals else None)
    return IngestResult(True, event, signals, event.category)


def _hydrate(store: Store, candidates: list[Candidate], salience_config: SalienceConfig) -> list[Candidate]:
    events = get_events(store, [c.event_id for c in candidates])
    sigma = predictive.load_surprise(store, [c.event_id for c in candidates])
    for c in candidates:
        ev = events[c.event_id]
        c.text = ev.text
        c.modality = ev.modality
        c.timestamp = ev.timestamp
        c.salience = ev.signal_tags.salience if ev.signal_tags else hybrid_salience(ev.text, salience_config).value
        c.sigma = sigma.get(c.event_id, 0.0)
    return candidates


def _latest_ts(store: Store) -> Optional[int]:
    return store.conn.execute("SELECT MAX(timestamp) FROM messages WHERE modality = 'message'").fetchone()[0]


def default_reranker(store: Store) -> OverlapReranker:
    cache: dict[str, float] = {}

    def store_idf(term: str) -> float:
        if term not in cache:
            n_docs, _ = corpus_stats(store)
            df = store.conn.execute("SELECT COUNT(*) FROM lex_postings WHERE term = ?", (term,)).fetchone()[0]
            cache[term] = idf(n_docs, df)
        return cache[term]

    return OverlapReranker(store_idf)


def _separation_hits(store: Store, query_text: str, entity: str, k: int) -> list:
    rows = store.conn.execute(
        "SELECT id FROM messages WHERE lower(sender) = lower(?) OR lower(recipient) = lower(?)", (entity, entity)
    ).fetchall()
    allowed = {r[0] for r in rows}
    if not allowed:
        return []
    return search_lexical(store, f"{entity} {query_text}", k, restrict_to=allowed)


_DEFAULT_RERANKER = object()


def query(
    store: Store,
    query_text: str,
    k: Optional[int] = None,
    config: Optional[EngineConfig] = None,
    *,
    reranker: Any = _DEFAULT_RERANKER,
    expansion: Callable[[str], list[str]] = no_expansion,
    trace: Optional[TraceHook] = None,
    now: Optional[int] = None,
) -> list[QueryResult]:
    """Ranked events for ``query_text``. Read-only: never writes to the store.

    ``reranker=None`` skips the reranking stage; the default is the IDF
    overlap reranker over this store's statistics.
    """
    config = config or load_config()
    fcfg = config.fusion
    k = fcfg.final_k if k is None else k
    if not 1 <= k <= fcfg.final_k:
        raise ValueError(f"k must be between 1 and final_k={fcfg.final_k}")
    if store.event_count() == 0:
        return []
    emit = trace or (lambda stage, n_in, n_out: None)
    if reranker is _DEFAULT_RERANKER:
        reranker = default_reranker(store)

    known = engram.known_entities(store)
    now = _latest_ts(store) if now is None else now
    intent = detect_intent(query_text, now, known_entities=known, config=config.intent)
    text = " ".join([query_text, *expansion(query_text)])

    window = fcfg.prerank_window
    lex = search_lexical(store, text, window)
    emit("lexical", 0, len(lex))
    vec = search_dense(store, text, window)
    emit("dense", 0, len(vec))
    senders = store.distinct_senders()
    sep = None
    if intent.focal_entity and senders > fcfg.sep_min_senders:
        sep = _separation_hits(store, text, intent.focal_entity, window)
        emit("separation", 0, len(sep))
    fused = rrf_fuse(lex, vec, sep, fcfg, distinct_senders=senders)
    emit("fusion", len(lex) + len(vec) + len(sep or []), len(fused))

    fused = _hydrate(store, fused, config.salience)
    profile_rows: list[Candidate] = []
    style_rows: list[Candidate] = []
    if intent.personality and intent.focal_entity:
        prof = engram.load_profile(store, intent.focal_entity)
        if prof and prof.event_id:
            profile_rows = [Candidate(prof.event_id)]
        style_rows = [Candidate(eid) for eid, _ in engram.style_candidates(store, intent.focal_entity, fcfg.style_inject_count)]
        _hydrate(store, profile_rows + style_rows, config.salience)
    n_in = len(fused)
    ranked = reweight(
        fused, intent, fcfg,
        profile_candidates=profile_rows,
        style_candidates=style_rows,
        surprise_built=predictive.surprise_built(store),
    )
    emit("reweight", n_in, len(ranked))
    pool = ranked[:window]
    emit("truncate", len(ranked), len(pool))
    final = rerank(text, pool, reranker, fcfg, question_type=intent.question_type, k=k)
    emit("rerank", len(pool), len(final))

    events = get_events(store, [c.event_id for c in final])
    return [QueryResult(events[c.event_id], c.score, c.injected) for c in final]


def run_batch(store: Store, config: Optional[EngineConfig] = None) -> dict[str, int]:
    """Post-ingestion stages in fixed order; returns row counts for this run."""
    config = config or load_config()
    episodes = rebuild_episodes(store)
    summaries, contradictions, timeline = consolidator.consolidate(store)
    scored = predictive.build_surprise_index(store, config.predictive)
    refreshed = engram.update_engrams(store)
    return {
        "episodes": len(episodes),
        "summaries": len(summaries),
        "contradictions": len(contradictions),
        "timeline_assertions": len(timeline),
        "surprise_scored": scored,
        "engrams_refreshed": refreshed,
    }


class Engine:
    """Convenience wrapper binding a store to a configuration and plug-ins."""

    def __init__(
        self,
        store: Store,
        config: Optional[EngineConfig] = None,
        *,
        reranker: Optional[Reranker] | object = _DEFAULT_RERANKER,
        expansion: Callable[[str], list[str]] = no_expansion,
        trace: Optional[TraceHook] = None,
    ):
        self.store = store
        self.config = config or load_config()
        self.reranker = reranker
        self.expansion = expansion
        self.trace = trace

    @classmethod
    def open(cls, path: str | Path, config: Optional[EngineConfig] = None, *, embedder: Any = None, **kwargs: Any) -> "Engine":
        config = config or load_config()
        store = open_store(path, embedder if embedder is not None else config.embedder)
        return cls(store, config, **kwargs)

    def ingest(self, event_input: EventInput | dict) -> IngestResult:
        if isinstance(event_input, dict):
            event_input = EventInput.from_dict(event_input)
        return ingest(self.store, event_input, self.config.gate, self.config.salience)

    def ingest_many(self, inputs: Sequence[EventInput | dict]) -> list[IngestResult]:
        return [self.ingest(i) for i in inputs]

    def query(self, query_text: str, k: Optional[int] = None) -> list[QueryResult]:
        return query(
            self.store, query_text, k, self.config,
            reranker=self.reranker, expansion=self.expansion, trace=self.trace,
        )

    def run_batch(self) -> dict[str, int]:
        return run_batch(self.store, self.config)

    def stats(self) -> dict[str, Any]:
        return stats(self.store)

    def close(self) -> None:
        self.store.close()

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()
