"""Batch consolidation: extractive cluster summaries, contradictions and timelines.

Clusters are episodes intersected with a sliding window of recent messages.
Each cluster yields one extractive summary (its most salient sentences), which
is appended to the store as a ``summary``-modality event so it is retrievable
like any other row. Assertions pulled from the window feed a per
(entity, predicate) timeline whose ``superseded_by`` links always point forward
in time; value changes between consecutive timeline entries are recorded as
contradictions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

from verbmem.models import Event, EventInput
from verbmem.salience import hybrid_salience
from verbmem.text import split_sentences

if TYPE_CHECKING:
    from verbmem.substrate import Store

SUMMARY_SENTENCES = 3
DEFAULT_WINDOW_EPISODES = 2
DEFAULT_WINDOW_EVENTS = 200

# closed predicate vocabulary
PREDICATES = ("lives_in", "works_at", "is")
POSSESSION_ATTRIBUTES = (
    "favorite color", "favorite food", "favorite book", "favorite movie", "favorite band",
    "favorite sport", "birthday", "job", "name", "email", "phone number", "address", "age",
    "dog", "cat", "car", "password", "office", "hometown", "nickname",
)

_NAME = r"(?P<entity>(?:[A-Z][\w'-]*)(?:\s+[A-Z][\w'-]*){0,2})"
_VALUE = r"(?P<value>[^.,;!?\n]+?)"
_END = r"(?=\s*(?:[.,;!?\n]|\band\b|\bbut\b|\bsince\b|\bbecause\b|$))"
_NON_ENTITIES = frozenset(
    "I The A An This That These Those It He She They We You My Our Your His Her Their There Here "
    "What When Where Who Why How Actually Also So And But Then Now Yes No Ok Okay Yesterday Today "
    "Tomorrow Last Next Recently Apparently Well Oh Hey Btw".split()
)
_POSS_ALT = "|".join(re.escape(a) for a in sorted(POSSESSION_ATTRIBUTES, key=len, reverse=True))

_LOCATION = re.compile(rf"\b{_NAME}\s+(?:now\s+)?(?:lives|lived|moved|relocated)\s+(?:in|to)\s+{_VALUE}{_END}")
_LOCATION_1P = re.compile(rf"\b(?:I|i)\s+(?:now\s+|just\s+)?(?:live|lived|moved|relocated)\s+(?:in|to)\s+{_VALUE}{_END}")
_WORK = re.compile(rf"\b{_NAME}\s+(?:now\s+)?(?:works|worked|started working)\s+(?:at|for)\s+{_VALUE}{_END}")
_WORK_1P = re.compile(rf"\b(?:I|i)\s+(?:now\s+)?(?:work|worked|started working)\s+(?:at|for)\s+{_VALUE}{_END}")
_POSSESSION = re.compile(rf"\b{_NAME}'s\s+(?P<attr>(?i:{_POSS_ALT}))\s+(?:is|was)\s+(?:now\s+)?{_VALUE}{_END}")
_POSSESSION_1P = re.compile(rf"\b[Mm]y\s+(?P<attr>(?i:{_POSS_ALT}))\s+(?:is|was)\s+(?:now\s+)?{_VALUE}{_END}")
_COPULA = re.compile(rf"\b{_NAME}\s+(?:is|was)\s+(?!going\b|not\b)(?P<value>(?:a|an|the)\s+[^.,;!?\n]+?|[A-Z][^.,;!?\n]*?){_END}")
_COPULA_1P = re.compile(rf"\b(?:I|i)\s+am\s+(?P<value>(?:a|an)\s+[^.,;!?\n]+?){_END}")


@dataclass(frozen=True)
class Assertion:
    entity: str
    predicate: str
    value: str
    event_id: int = 0
    ts: int = 0


@dataclass(frozen=True)
class SummaryRecord:
    id: int
    cluster_key: str
    event_id: int
    text: str
    source_event_ids: list[int]
    created_ts: int


@dataclass(frozen=True)
class ContradictionRecord:
    entity: str
    predicate: str
    event_id_a: int
    event_id_b: int
    detected_ts: int


@dataclass(frozen=True)
class TimelineAssertion:
    id: int
    entity: str
    predicate: str
    value: str
    event_id: int
    ts: int
    superseded_by: Optional[int]


def _clean_value(value: str) -> str:
    return re.sub(r"\s+", " ", value).strip().strip("\"'")


def _trim_entity(entity: str) -> str:
    words = entity.split()
    while words and words[0] in _NON_ENTITIES:
        words.pop(0)
    return " ".join(words)


def extract_assertions(text: str, sender: str = "", ts: int = 0) -> list[tuple[str, str, str]]:
    """Deterministic ``(entity, predicate, value)`` triples from copula, location and possession patterns.

    First-person forms resolve to ``sender`` (and are skipped when it is empty).
    """
    found: list[tuple[str, str, str]] = []

    def add(entity: str, predicate: str, value: str) -> None:
        value = _clean_value(value)
        if entity and value and (entity, predicate, value) not in found:
            found.append((entity, predicate, value))

    for sentence in split_sentences(text):
        taken: list[tuple[int, int]] = []

        def claim(m: re.Match) -> bool:
            span = m.span()
            if any(s < span[1] and span[0] < e for s, e in taken):
                return False
            taken.append(span)
            return True

        for m in _POSSESSION.finditer(sentence):
            if _trim_entity(m.group("entity")) and claim(m):
                add(_trim_entity(m.group("entity")), m.group("attr").lower().replace(" ", "_"), m.group("value"))
        for m in _POSSESSION_1P.finditer(sentence):
            if sender and claim(m):
                add(sender, m.group("attr").lower().replace(" ", "_"), m.group("value"))
        for rx, rx_1p, predicate in ((_LOCATION, _LOCATION_1P, "lives_in"), (_WORK, _WORK_1P, "works_at")):
            for m in rx.finditer(sentence):
                if _trim_entity(m.group("entity")) and claim(m):
                    add(_trim_entity(m.group("entity")), predicate, m.group("value"))
            for m in rx_1p.finditer(sentence):
                if sender and claim(m):
                    add(sender, predicate, m.group("value"))
        for m in _COPULA.finditer(sentence):
            if _trim_entity(m.group("entity")) and claim(m):
                add(_trim_entity(m.group("entity")), "is", m.group("value"))
        for m in _COPULA_1P.finditer(sentence):
            if sender and claim(m):
                add(sender, "is", m.group("value"))
    return found


def assertions_for(event: Event) -> list[Assertion]:
    return [
        Assertion(e, p, v, event.id, event.timestamp)
        for e, p, v in extract_assertions(event.text, event.sender, event.timestamp)
    ]


def _key(a: Assertion) -> tuple[str, str]:
    return a.entity.casefold(), a.predicate


def detect_contradiction(a: Assertion, b: Assertion) -> bool:
    """True iff ``b`` is a later claim about the same entity/predicate with a different value."""
    return _key(a) == _key(b) and a.value.casefold() != b.value.casefold() and b.ts > a.ts


def extractive_summary(events: list[Event], n_sentences: int = SUMMARY_SENTENCES) -> str:
    """Top sentences by salience, kept in conversation order, each tagged with its speaker."""
    scored = []
    order = 0
    for ev in events:
        for sentence in split_sentences(ev.text):
            scored.append((hybrid_salience(sentence).value, order, ev.sender, sentence))
            order += 1
    best = sorted(scored, key=lambda s: (-s[0], s[1]))[:n_sentences]
    best.sort(key=lambda s: s[1])
    return " ".join(f"{sender}: {sentence}" if sender else sentence for _, _, sender, sentence in best)


def select_window(
    store: "Store",
    window: Optional[int] = None,
    *,
    max_episodes: int = DEFAULT_WINDOW_EPISODES,
    max_events: int = DEFAULT_WINDOW_EVENTS,
) -> list[list[Event]]:
    """Clusters for the sliding window: recent episodes, clipped to the last N messages.

    ``window`` (a message count) overrides the default of "last 2 episodes or
    200 messages, whichever is smaller".
    """
    from verbmem.substrate import list_events, segment_episodes

    messages = list_events(store, modality="message")
    if not messages:
        return []
    episodes = segment_episodes(messages)
    if window is not None:
        recent = messages[-window:] if window > 0 else []
    else:
        by_episodes = [e for ep in episodes[-max_episodes:] for e in ep]
        recent = by_episodes if len(by_episodes) <= max_events else messages[-max_events:]
    keep = {e.id for e in recent}
    clusters = [[e for e in ep if e.id in keep] for ep in episodes]
    return [c for c in clusters if c]


def _rebuild_chain(conn, entity: str, predicate: str) -> list[tuple]:
    """Relink one (entity, predicate) chain in (ts, event_id) order; returns new contradiction pairs."""
    rows = conn.execute(
        "SELECT id, value, event_id, ts FROM timeline WHERE entity = ? AND predicate = ? ORDER BY ts, event_id",
        (entity, predicate),
    ).fetchall()
    contradictions = []
    for i, (row_id, value, event_id, ts) in enumerate(rows):
        successor = next((r for r in rows[i + 1:] if r[3] > ts), None)
        conn.execute("UPDATE timeline SET superseded_by = ? WHERE id = ?", (successor[0] if successor else None, row_id))
        if successor is not None:
            a = Assertion(entity, predicate, value, event_id, ts)
            b = Assertion(entity, predicate, successor[1], successor[2], successor[3])
            if detect_contradiction(a, b):
                contradictions.append((a, b))
    return contradictions


def consolidate(
    store: "Store",
    window: Optional[int] = None,
    *,
    summarizer: Optional[Callable[[list[Event]], str]] = None,
) -> tuple[list[SummaryRecord], list[ContradictionRecord], list[TimelineAssertion]]:
    """Run one consolidation pass; returns only the rows this pass created.

    ``summarizer`` is the hook for an abstractive summarizer; the default is
    extractive. Re-running over an unchanged window creates nothing.
    """
    from verbmem.substrate import _insert

    summarize = summarizer or extractive_summary
    clusters = select_window(store, window)
    summaries: list[SummaryRecord] = []
    contradictions: list[ContradictionRecord] = []
    timeline: list[TimelineAssertion] = []
    if not clusters:
        return summaries, contradictions, timeline

    store._dense_cache = None
    with store.transaction() as conn:
        for cluster in clusters:
            source_ids = [e.id for e in cluster]
            cluster_key = f"{source_ids[0]}-{source_ids[-1]}-{len(source_ids)}"
            if conn.execute("SELECT 1 FROM summaries WHERE cluster_key = ?", (cluster_key,)).fetchone():
                continue
            text = summarize(cluster)
            if not text:
                continue
            created_ts = cluster[-1].timestamp
            summary_event = _insert(
                store,
                EventInput(text=text, sender="", timestamp=created_ts, category="statement", modality="summary"),
                None,
                None,
            )
            cur = conn.execute(
                "INSERT INTO summaries(cluster_key, event_id, source_event_ids, created_ts) VALUES (?, ?, ?, ?)",
                (cluster_key, summary_event.id, json.dumps(source_ids), created_ts),
            )
            summaries.append(SummaryRecord(cur.lastrowid, cluster_key, summary_event.id, text, source_ids, created_ts))

        touched: set[tuple[str, str]] = set()
        for cluster in clusters:
            for event in cluster:
                for a in assertions_for(event):
                    entity = a.entity
                    # reuse the spelling already on file for this entity
                    row = conn.execute(
                        "SELECT entity FROM timeline WHERE lower(entity) = lower(?) AND predicate = ? LIMIT 1",
                        (entity, a.predicate),
                    ).fetchone()
                    if row:
                        entity = row[0]
                    last = conn.execute(
                        "SELECT value, ts, event_id FROM timeline WHERE entity = ? AND predicate = ? "
                        "AND (ts < ? OR (ts = ? AND event_id < ?)) ORDER BY ts DESC, event_id DESC LIMIT 1",
                        (entity, a.predicate, a.ts, a.ts, a.event_id),
                    ).fetchone()
                    if last and last[0].casefold() == a.value.casefold():
                        continue  # restatement, not a new timeline entry
                    cur = conn.execute(
                        "INSERT OR IGNORE INTO timeline(entity, predicate, value, event_id, ts) VALUES (?, ?, ?, ?, ?)",
                        (entity, a.predicate, a.value, a.event_id, a.ts),
                    )
                    if cur.rowcount:
                        touched.add((entity, a.predicate))
                        timeline.append(
                            TimelineAssertion(cur.lastrowid, entity, a.predicate, a.value, a.event_id, a.ts, None)
                        )

        for entity, predicate in sorted(touched):
            for a, b in _rebuild_chain(conn, entity, predicate):
                cur = conn.execute(
                    "INSERT OR IGNORE INTO contradictions(entity, predicate, event_id_a, event_id_b, detected_ts) "
                    "VALUES (?, ?, ?, ?, ?)",
                    (entity, predicate, a.event_id, b.event_id, b.ts),
                )
                if cur.rowcount:
                    contradictions.append(ContradictionRecord(entity, predicate, a.event_id, b.event_id, b.ts))

    if timeline:
        links = dict(
            conn.execute(
                f"SELECT id, superseded_by FROM timeline WHERE id IN ({','.join('?' * len(timeline))})",
                [t.id for t in timeline],
            ).fetchall()
        )
        timeline = [
            TimelineAssertion(t.id, t.entity, t.predicate, t.value, t.event_id, t.ts, links.get(t.id))
            for t in timeline
        ]
    return summaries, contradictions, timeline


def load_timeline(store: "Store", entity: Optional[str] = None, predicate: Optional[str] = None) -> list[TimelineAssertion]:
    clauses, params = [], []
    if entity is not None:
        clauses.append("lower(entity) = lower(?)")
        params.append(entity)
    if predicate is not None:
        clauses.append("predicate = ?")
        params.append(predicate)
    where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
    rows = store.conn.execute(
        f"SELECT id, entity, predicate, value, event_id, ts, superseded_by FROM timeline {where} "
        "ORDER BY entity, predicate, ts, event_id",
        params,
    )
    return [TimelineAssertion(*r) for r in rows]


def load_contradictions(store: "Store") -> list[ContradictionRecord]:
    rows = store.conn.execute(
        "SELECT entity, predicate, event_id_a, event_id_b, detected_ts FROM contradictions ORDER BY id"
    )
    return [ContradictionRecord(*r) for r in rows]


def load_summaries(store: "Store") -> list[SummaryRecord]:
    rows = store.conn.execute(
        "SELECT s.id, s.cluster_key, s.event_id, m.text, s.source_event_ids, s.created_ts "
        "FROM summaries s JOIN messages m ON m.id = s.event_id ORDER BY s.id"
    )
    return [SummaryRecord(r[0], r[1], r[2], r[3], json.loads(r[4]), r[5]) for r in rows]
