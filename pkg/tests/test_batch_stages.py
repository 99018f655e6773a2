import numpy as np
import pytest

from verbmem import predictive
from verbmem.consolidator import (
    Assertion, consolidate, detect_contradiction, extract_assertions, load_contradictions, load_summaries,
    load_timeline,
)
from verbmem.dense import ngram_vector, normalize
from verbmem.engram import (
    extract_preferences, load_profile, load_style_vector, style_score, style_vector, update_engrams,
)
from verbmem.models import Event
from verbmem.predictive import FactFingerprint, fingerprints, score_stream
from verbmem.substrate import list_events, rebuild_episodes

from conftest import HOUR, T0


def ev(i, text, ts=None, sender="Bob"):
    return Event(i, text, sender, None, T0 + i if ts is None else ts, "statement", "message")


# assertions and contradictions

@pytest.mark.parametrize("text, sender, expect", [
    ("Alice lives in Lisbon", "", [("Alice", "lives_in", "Lisbon")]),
    ("I moved to Porto", "Bob", [("Bob", "lives_in", "Porto")]),
    ("Carla works at Siemens.", "", [("Carla", "works_at", "Siemens")]),
    ("My favorite color is green", "Dee", [("Dee", "favorite_color", "green")]),
    ("ok", "Bob", []),
])
def test_extract_assertions(text, sender, expect):
    assert extract_assertions(text, sender) == expect


def test_detect_contradiction():
    a = Assertion("Alice", "lives_in", "Lisbon", 1, 100)
    assert detect_contradiction(a, Assertion("alice", "lives_in", "Porto", 2, 200))
    assert not detect_contradiction(a, Assertion("Alice", "lives_in", "Lisbon", 2, 200))
    assert not detect_contradiction(a, Assertion("Alice", "works_at", "Porto", 2, 200))
    assert not detect_contradiction(a, Assertion("Alice", "lives_in", "Porto", 2, 100))


def test_consolidate_conflict_and_idempotence(store, add):
    assert consolidate(store) == ([], [], [])
    add("Alice lives in Lisbon", "Bob", T0)
    add("Alice moved to Porto", "Bob", T0 + 600)
    summaries, contradictions, timeline = consolidate(store)
    assert len(summaries) == 1 and len(contradictions) == 1 and len(timeline) == 2
    chain = load_timeline(store, "Alice", "lives_in")
    assert [t.value for t in chain] == ["Lisbon", "Porto"]
    assert chain[0].superseded_by == chain[1].id and chain[1].superseded_by is None
    summary_event = list_events(store, modality="summary")
    assert len(summary_event) == 1 and "Lisbon" in summary_event[0].text
    assert consolidate(store) == ([], [], [])
    assert len(load_summaries(store)) == 1 and len(load_contradictions(store)) == 1


def test_timeline_chain_forward_and_acyclic(store, add):
    values = ["Lisbon", "Porto", "Madrid", "Porto", "Rome"]
    for i, v in enumerate(values):
        add(f"Alice lives in {v}", "Bob", T0 + i * 100)
    add("Alice lives in Oslo", "Bob", T0 + 400)  # same timestamp as Rome
    consolidate(store)
    rows = {t.id: t for t in load_timeline(store)}
    for t in rows.values():
        seen = {t.id}
        cur = t
        while cur.superseded_by is not None:
            nxt = rows[cur.superseded_by]
            assert nxt.ts > cur.ts
            assert nxt.id not in seen
            seen.add(nxt.id)
            cur = nxt


def test_consolidate_window_argument(store, add):
    for i in range(6):
        add(f"note number {i} about the garden", "Bob", T0 + i * 8 * HOUR)
    summaries, _, _ = consolidate(store, window=2)
    assert len(summaries) == 2


# surprise

def test_fingerprints():
    fps = fingerprints("Meeting moved to March 3, 3pm, room 401")
    assert FactFingerprint("number", "3pm") in fps and FactFingerprint("number", "401") in fps
    assert any(f.kind == "date" for f in fps)
    assert fingerprints("") == set()


def test_surprise_rules():
    cfg = predictive.SurpriseConfig()
    a = ev(1, "Dinner with Marta at Nando's on Friday")
    repeat = ev(2, a.text)
    scores = score_stream([a, repeat], cfg)
    assert scores[0].sigma == pytest.approx(cfg.w_fact + cfg.b_detail + cfg.b_event)
    assert scores[1].sigma == pytest.approx(cfg.b_detail + cfg.b_event)
    assert score_stream([ev(1, "hmm ok")])[0].sigma == 0.0


def test_contradiction_bonus():
    cfg = predictive.SurpriseConfig()
    first = ev(1, "meeting in room 401")
    update = ev(2, "actually, the meeting is in room 502")
    plain = ev(2, "the meeting is in room 502")
    with_update = score_stream([first, update], cfg)[1].sigma
    without = score_stream([first, plain], cfg)[1].sigma
    assert with_update == pytest.approx(without + cfg.b_contra)


def test_order_dependence():
    a, b = ev(1, "Trip to Kyoto"), ev(2, "Kyoto trip photos")
    fwd = score_stream([a, b])
    rev = score_stream([Event(1, b.text, "", None, 1, "statement", "message"),
                        Event(2, a.text, "", None, 2, "statement", "message")])
    assert fwd[0].sigma > fwd[1].sigma and rev[0].sigma > rev[1].sigma
    assert score_stream([a, b]) == fwd


def test_build_surprise_index(store, add):
    add("Flight to Oslo on May 4, seat 12C", "Bob")
    add("ok", "Bob")
    assert not predictive.surprise_built(store)
    assert predictive.build_surprise_index(store) == 2
    assert predictive.surprise_built(store)
    sig = predictive.load_surprise(store)
    assert set(sig) == {1, 2} and all(0 <= v <= 1 for v in sig.values())


# engrams

def test_extract_preferences():
    assert extract_preferences("I love hiking", "Alice") == [("Alice", "hiking", "likes")]
    assert extract_preferences("Bob hates early meetings.", "x") == [("Bob", "meetings", "dislikes early meetings")]
    assert extract_preferences("ok", "Alice") == []


def test_style_vector_mean_pool():
    texts = ["Hey there!", "see you at 5", "LOL that was wild"]
    direct = normalize(np.mean([ngram_vector(t) for t in texts], axis=0))
    assert np.allclose(style_vector(texts), direct, atol=1e-9)
    assert np.allclose(style_vector(texts[:1]), ngram_vector(texts[0]), atol=1e-12)


def test_update_engrams(store, add):
    add("I love hiking", "Alice", T0)
    add("Sounds fun", "Bob", T0 + 10)
    assert update_engrams(store) == 2
    prof = load_profile(store, "alice")
    assert prof.attributes == {"hiking": "likes"}
    assert load_profile(store, "Bob").attributes == {}
    assert load_style_vector(store, "Zed") is None
    assert style_score(store, "Zed", "hi") is None
    assert style_score(store, "Bob", "Sounds fun") == pytest.approx(1.0, abs=1e-9)
    assert update_engrams(store) == 0
    assert len(list_events(store, modality="profile")) == 1


def test_episodes_persisted(store, add):
    add("a", ts=T0)
    add("b", ts=T0 + 7 * HOUR)
    assert len(rebuild_episodes(store)) == 2
