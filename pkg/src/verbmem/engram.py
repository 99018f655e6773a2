"""Per-speaker engrams: preference profiles and character n-gram style vectors."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from verbmem.dense import decode_vector, encode_vector, ngram_vector, normalize
from verbmem.models import Event, EventInput

if TYPE_CHECKING:
    from verbmem.substrate import Store

POLARITY = {
    "like": "likes", "likes": "likes", "love": "likes", "loves": "likes", "enjoy": "likes",
    "enjoys": "likes", "adore": "likes", "adores": "likes",
    "prefer": "prefers", "prefers": "prefers",
    "hate": "dislikes", "hates": "dislikes", "dislike": "dislikes", "dislikes": "dislikes",
    "detest": "dislikes", "detests": "dislikes", "can't stand": "dislikes", "cannot stand": "dislikes",
}
_VERBS = "|".join(sorted((re.escape(v) for v in POLARITY), key=len, reverse=True))
_OBJECT = r"(?P<obj>[A-Za-z][\w' -]*?)(?=\s*(?:[.,;!?\n]|\b(?:and|but|because|when|over|in|with|on|at|for|than|more|so|too|very)\b|$))"
_FIRST_PERSON = re.compile(rf"\b[Ii]\s+(?:really\s+|absolutely\s+|totally\s+|kind of\s+)?(?P<verb>{_VERBS})\s+{_OBJECT}")
_THIRD_PERSON = re.compile(rf"\b(?P<entity>[A-Z][a-z'-]+)\s+(?:really\s+)?(?P<verb>{_VERBS})\s+{_OBJECT}")
_DETERMINERS = frozenset("the a an my our your some any to".split())
_NOT_NAMES = frozenset("I The A An This That It He She They We You Who What Everyone Nobody Somebody".split())
MAX_OBJECT_WORDS = 4
STYLE_SCAN_LIMIT = 500


@dataclass(frozen=True)
class EntityProfile:
    entity: str
    attributes: dict[str, str]
    updated_ts: int
    event_id: Optional[int] = None


@dataclass(frozen=True)
class StyleVector:
    entity: str
    vector: np.ndarray


def _preference(verb: str, obj: str) -> Optional[tuple[str, str]]:
    words = [w for w in obj.strip().split() if w]
    while words and words[0].lower() in _DETERMINERS:
        words.pop(0)
    if not words or len(words) > MAX_OBJECT_WORDS:
        return None
    phrase = " ".join(w.lower() for w in words)
    head = words[-1].lower()
    polarity = POLARITY[verb.lower()]
    return head, polarity if len(words) == 1 else f"{polarity} {phrase}"


def extract_preferences(text: str, sender: str) -> list[tuple[str, str, str]]:
    """``(entity, key, value)`` preference triples; key is the object's head noun."""
    out = []
    for m in _FIRST_PERSON.finditer(text):
        pref = _preference(m.group("verb"), m.group("obj"))
        if pref and sender:
            out.append((sender, *pref))
    for m in _THIRD_PERSON.finditer(text):
        if m.group("entity") in _NOT_NAMES:
            continue
        pref = _preference(m.group("verb"), m.group("obj"))
        if pref:
            out.append((m.group("entity"), *pref))
    return out


def style_vector(texts: list[str]) -> np.ndarray:
    """L2-normalized mean of the per-message n-gram vectors (case preserved)."""
    return normalize(np.mean([ngram_vector(t) for t in texts], axis=0))


def render_profile(entity: str, attributes: dict[str, str]) -> str:
    parts = [v if " " in v else f"{v} {k}" for k, v in sorted(attributes.items())]
    return f"{entity} profile: " + "; ".join(parts) + "."


def update_engrams(store: "Store") -> int:
    """Refresh profiles and style vectors from the full history; returns entities whose rows changed.

    A profile with attributes is also materialized as a ``profile``-modality
    event so retrieval can surface it. Unchanged entities are left untouched.
    """
    from verbmem.substrate import _insert, list_events

    messages = list_events(store, modality="message")
    by_sender: dict[str, list[Event]] = defaultdict(list)
    attributes: dict[str, dict[str, str]] = defaultdict(dict)
    last_ts: dict[str, int] = {}
    spelling: dict[str, str] = {}
    for ev in messages:
        if ev.sender:
            by_sender[ev.sender].append(ev)
            spelling.setdefault(ev.sender.casefold(), ev.sender)
            last_ts[ev.sender] = ev.timestamp
    for ev in messages:
        for entity, key, value in extract_preferences(ev.text, ev.sender):
            entity = spelling.setdefault(entity.casefold(), entity)
            attributes[entity][key] = value  # later statements win
            last_ts[entity] = max(last_ts.get(entity, 0), ev.timestamp)

    changed = 0
    store._dense_cache = None
    with store.transaction() as conn:
        for entity in sorted(set(by_sender) | set(attributes)):
            touched = False
            if entity in by_sender:
                texts = [e.text for e in by_sender[entity]]
                blob = encode_vector(style_vector(texts))
                row = conn.execute(
                    "SELECT vector, message_count FROM entity_style_vectors WHERE entity = ?", (entity,)
                ).fetchone()
                if row is None or row[0] != blob or row[1] != len(texts):
                    conn.execute(
                        "INSERT INTO entity_style_vectors(entity, vector, message_count) VALUES (?, ?, ?) "
                        "ON CONFLICT(entity) DO UPDATE SET vector = excluded.vector, "
                        "message_count = excluded.message_count",
                        (entity, blob, len(texts)),
                    )
                    touched = True
            attrs = attributes.get(entity, {})
            attrs_json = json.dumps(attrs, sort_keys=True)
            row = conn.execute("SELECT attributes, event_id FROM entity_profiles WHERE entity = ?", (entity,)).fetchone()
            if row is None or row[0] != attrs_json:
                event_id = row[1] if row else None
                if attrs:
                    event = _insert(
                        store,
                        EventInput(
                            text=render_profile(entity, attrs), sender=entity,
                            timestamp=last_ts[entity], category="statement", modality="profile",
                        ),
                        None,
                        None,
                    )
                    event_id = event.id
                conn.execute(
                    "INSERT INTO entity_profiles(entity, attributes, updated_ts, event_id) VALUES (?, ?, ?, ?) "
                    "ON CONFLICT(entity) DO UPDATE SET attributes = excluded.attributes, "
                    "updated_ts = excluded.updated_ts, event_id = excluded.event_id",
                    (entity, attrs_json, last_ts[entity], event_id),
                )
                touched = True
            changed += touched
    return changed


def load_profile(store: "Store", entity: str) -> Optional[EntityProfile]:
    row = store.conn.execute(
        "SELECT entity, attributes, updated_ts, event_id FROM entity_profiles WHERE lower(entity) = lower(?)",
        (entity,),
    ).fetchone()
    if row is None:
        return None
    return EntityProfile(row[0], json.loads(row[1]), row[2], row[3])


def load_style_vector(store: "Store", entity: str) -> Optional[StyleVector]:
    row = store.conn.execute(
        "SELECT entity, vector FROM entity_style_vectors WHERE lower(entity) = lower(?)", (entity,)
    ).fetchone()
    if row is None:
        return None
    return StyleVector(row[0], decode_vector(row[1]))


def known_entities(store: "Store") -> list[str]:
    rows = store.conn.execute(
        "SELECT entity FROM entity_profiles UNION SELECT entity FROM entity_style_vectors "
        "UNION SELECT DISTINCT sender FROM messages WHERE modality = 'message' AND sender != ''"
    )
    return sorted({r[0] for r in rows})


def style_score(store: "Store", entity: str, candidate_text: str) -> Optional[float]:
    """Cosine between ``entity``'s style vector and the candidate's n-gram vector; ``None`` if unknown."""
    sv = load_style_vector(store, entity)
    if sv is None:
        return None
    return float(np.dot(sv.vector, ngram_vector(candidate_text)))


def style_candidates(store: "Store", entity: str, limit: int) -> list[tuple[int, float]]:
    """The entity's own recent messages ranked by style cosine (ties by ascending id)."""
    sv = load_style_vector(store, entity)
    if sv is None or limit < 1:
        return []
    rows = store.conn.execute(
        "SELECT id, text FROM messages WHERE modality = 'message' AND lower(sender) = lower(?) "
        "ORDER BY id DESC LIMIT ?",
        (entity, STYLE_SCAN_LIMIT),
    ).fetchall()
    scored = [(eid, float(np.dot(sv.vector, ngram_vector(text)))) for eid, text in rows]
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored[:limit]
