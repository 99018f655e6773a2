"""Per-event surprise scores from fact fingerprints.

One pass over the message stream in temporal order keeps an accumulated fact
set. An event's surprise is the weighted fraction of its fingerprints not yet
seen, plus small bonuses for length, detail, event keywords, and update verbs
that contradict an earlier fact. Nothing here is learned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from verbmem.consolidator import Assertion, assertions_for, detect_contradiction
from verbmem.models import Event
from verbmem.text import MONTHS, WEEKDAYS, find_dates, find_numbers, split_sentences, tokenize

if TYPE_CHECKING:
    from verbmem.substrate import Store

FINGERPRINT_KINDS = ("number", "proper_noun", "date", "event_keyword", "definitional")

EVENT_KEYWORDS = frozenset(
    "meeting wedding birthday party trip interview appointment flight concert graduation funeral "
    "conference vacation holiday dinner lunch surgery exam deadline launch promotion married engaged "
    "born died hired fired promoted moved retired divorced".split()
)
UPDATE_MARKERS = ("actually", "instead", "changed", "moved to", "no longer", "now", "update")

_SENTENCE_STARTERS = frozenset(
    "i the a an this that these those it he she they we you my our your his her their there here "
    "what when where who why how actually also so and but then now yes no ok okay hi hey please "
    "thanks sorry well oh just".split()
)
_DEFINITIONAL = re.compile(r"\b(\w+)\s+(?:is|are|means|refers to)\s+(?:a|an|the)\s+(\w+)", re.IGNORECASE)
_SLOT = re.compile(r"\b([a-z]{3,})\s+#?(\d+)\b")
_SLOT_STOP = frozenset("the and for with from about than over under into onto".split())


@dataclass(frozen=True)
class FactFingerprint:
    kind: str
    value: str


@dataclass
class SurpriseConfig:
    w_fact: float = 0.6
    b_len: float = 0.1
    b_detail: float = 0.1
    b_event: float = 0.1
    b_contra: float = 0.2
    long_chars: int = 150
    detail_min: int = 3


@dataclass(frozen=True)
class SurpriseScore:
    event_id: int
    sigma: float


def _proper_nouns(text: str) -> set[str]:
    out = set()
    calendar = set(MONTHS) | set(WEEKDAYS)
    for sentence in split_sentences(text):
        for i, m in enumerate(re.finditer(r"[^\W\d_][\w'-]*", sentence)):
            word = m.group(0)
            if not word[0].isupper():
                continue
            low = word.casefold()
            if word == "I" or low in calendar or (i == 0 and (low in _SENTENCE_STARTERS or low in EVENT_KEYWORDS)):
                continue
            out.add(low)
    return out


def fingerprints(text: str) -> set[FactFingerprint]:
    """Fact fingerprints of ``text`` as a set (repeats collapse)."""
    fps: set[FactFingerprint] = set()
    for _, _, date in find_dates(text):
        fps.add(FactFingerprint("date", re.sub(r"\s+", " ", date.casefold().replace(",", ""))))
    for num in find_numbers(text):
        fps.add(FactFingerprint("number", num.casefold()))
    for noun in _proper_nouns(text):
        fps.add(FactFingerprint("proper_noun", noun))
    for tok in tokenize(text):
        if tok in EVENT_KEYWORDS:
            fps.add(FactFingerprint("event_keyword", tok))
    for m in _DEFINITIONAL.finditer(text):
        fps.add(FactFingerprint("definitional", f"{m.group(1).casefold()}={m.group(2).casefold()}"))
    return fps


def has_update_marker(text: str) -> bool:
    lowered = " ".join(tokenize(text))
    return any(re.search(rf"\b{re.escape(marker)}\b", lowered) for marker in UPDATE_MARKERS)


def slot_facts(event: Event) -> list[Assertion]:
    """Keyed facts whose value can be contradicted: extracted assertions plus ``<noun> <number>`` slots."""
    facts = list(assertions_for(event))
    for m in _SLOT.finditer(event.text.lower()):
        if m.group(1) not in _SLOT_STOP:
            facts.append(Assertion(m.group(1), "number", m.group(2), event.id, event.timestamp))
    return facts


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def score_stream(events: list[Event], config: Optional[SurpriseConfig] = None) -> list[SurpriseScore]:
    """Surprise for each event of an already time-ordered stream."""
    config = config or SurpriseConfig()
    seen: set[FactFingerprint] = set()
    latest: dict[tuple[str, str], Assertion] = {}
    out = []
    for ev in events:
        fps = fingerprints(ev.text)
        novel_frac = len(fps - seen) / max(1, len(fps))
        facts = slot_facts(ev)
        contradicts = has_update_marker(ev.text) and any(
            (prior := latest.get((f.entity.casefold(), f.predicate))) is not None and detect_contradiction(prior, f)
            for f in facts
        )
        sigma = config.w_fact * novel_frac
        if len(ev.text) > config.long_chars:
            sigma += config.b_len
        if len(fps) >= config.detail_min:
            sigma += config.b_detail
        if any(fp.kind == "event_keyword" for fp in fps):
            sigma += config.b_event
        if contradicts:
            sigma += config.b_contra
        out.append(SurpriseScore(ev.id, _clamp(sigma)))
        seen |= fps
        for f in facts:
            latest[(f.entity.casefold(), f.predicate)] = f
    return out


def build_surprise_index(store: "Store", config: Optional[SurpriseConfig] = None) -> int:
    """Full rebuild over all messages; returns the number of scored events."""
    from verbmem.substrate import list_events

    scores = score_stream(list_events(store, modality="message"), config)
    with store.transaction() as conn:
        conn.execute("DELETE FROM surprise_scores")
        conn.executemany(
            "INSERT INTO surprise_scores(event_id, sigma) VALUES (?, ?)", [(s.event_id, s.sigma) for s in scores]
        )
        store.set_meta("surprise_built", "1")
    return len(scores)


def surprise_built(store: "Store") -> bool:
    return store.get_meta("surprise_built") == "1"


def load_surprise(store: "Store", event_ids: Optional[list[int]] = None) -> dict[int, float]:
    if event_ids is None:
        return dict(store.conn.execute("SELECT event_id, sigma FROM surprise_scores").fetchall())
    out: dict[int, float] = {}
    for start in range(0, len(event_ids), 500):
        chunk = event_ids[start:start + 500]
        marks = ",".join("?" * len(chunk))
        out.update(store.conn.execute(f"SELECT event_id, sigma FROM surprise_scores WHERE event_id IN ({marks})", chunk))
    return out
