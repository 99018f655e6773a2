from datetime import datetime, timezone

import pytest

import verbmem
from verbmem import consolidator, engram, predictive
from verbmem.config import EngineConfig, load_config
from verbmem.engine import Engine, detect_intent, ingest, query, run_batch, time_window
from verbmem.gate import GateConfig
from verbmem.models import EventInput
from verbmem.substrate import get_event, open_store, rebuild_episodes

from conftest import T0


def utc(*args):
    return int(datetime(*args, tzinfo=timezone.utc).timestamp())


def test_ingest_gate_on_off(store):
    r = ingest(store, EventInput(text="ok"), GateConfig())
    assert not r.admitted and r.event is None and r.signals.salience == 0.02
    assert store.event_count() == 0
    r = ingest(store, EventInput(text="ok"), GateConfig(tau=None))
    assert r.admitted and store.event_count() == 1
    r = ingest(store, EventInput(text="I will send you the signed lease on Friday, March 3rd, before noon.",
                                 timestamp=T0), GateConfig())
    assert r.admitted
    assert r.event.signal_tags is not None
    assert get_event(store, r.event.id).signal_tags == r.signals


def test_reject_log(store, tmp_path):
    log = tmp_path / "rejects.jsonl"
    ingest(store, EventInput(text="lol"), GateConfig(reject_log=str(log)))
    assert '"lol"' in log.read_text()


def test_query_single_event(store, add):
    add("The lighthouse keeper retired in 1998")
    res = query(store, "when did the lighthouse keeper retire?")
    assert res[0].event.id == 1


def test_empty_store_and_k_bounds(store, add):
    assert query(store, "anything") == []
    add("something")
    with pytest.raises(ValueError):
        query(store, "x", k=11)


def test_query_is_read_only(tmp_path):
    path = tmp_path / "ro.db"
    with open_store(path) as s:
        for i, t in enumerate(["Alice lives in Lisbon", "Bob likes chess", "dinner on Friday at 8"]):
            s_input = EventInput(text=t, sender="Alice", timestamp=T0 + i)
            ingest(s, s_input, GateConfig(tau=None))
        run_batch(s)
    before = path.read_bytes()
    with open_store(path) as s:
        for q in ["where does Alice live?", "what does Alice like?", "summarize dinner plans", "when is dinner?"]:
            query(s, q)
    assert path.read_bytes() == before


def test_trace_stage_order(store, add):
    add("red apples and green pears")
    stages = []
    query(store, "apples", trace=lambda stage, a, b: stages.append(stage))
    assert stages == ["lexical", "dense", "fusion", "reweight", "truncate", "rerank"]


@pytest.mark.parametrize("text, temporal, qtype", [
    ("when did Alice move?", True, "detail"),
    ("summarize the trip planning", False, "synthesis"),
    ("what is the capital fact mentioned?", False, "general"),
])
def test_intent_rules(text, temporal, qtype):
    intent = detect_intent(text)
    assert intent.temporal is temporal and intent.question_type == qtype


def test_personality_and_entity():
    intent = detect_intent("what does Alice like?", known_entities=["Alice", "Bob"])
    assert intent.personality and intent.focal_entity == "Alice"


def test_time_windows():
    now = utc(2024, 5, 20, 12)
    assert time_window("what happened on 2024-03-02?") == (utc(2024, 3, 2), utc(2024, 3, 3) - 1)
    assert time_window("anything yesterday?", now) == (now - 2 * 86400, now)
    assert time_window("what did we do in March?", now) == (utc(2024, 3, 1), utc(2024, 4, 1) - 1)
    assert time_window("plans for June 3", now) == (utc(2023, 6, 3), utc(2023, 6, 4) - 1)
    assert time_window("may I ask something") is None


def test_personality_query_surfaces_profile(store):
    gate_off = GateConfig(tau=None)
    chatter = ["Morning everyone", "The train was late again", "I love hiking", "Lunch was fine",
               "Weather looks grim today", "I love sourdough bread"]
    for i, t in enumerate(chatter):
        ingest(store, EventInput(text=t, sender="Alice" if i % 2 == 0 else "Bob", timestamp=T0 + i * 60), gate_off)
    run_batch(store)
    prof = engram.load_profile(store, "Alice")
    assert prof and prof.attributes["hiking"] == "likes"
    res = query(store, "what does Alice like?")
    assert prof.event_id in [r.event.id for r in res]


def test_batch_matches_stage_calls(tmp_path):
    texts = [("Alice lives in Lisbon", 0), ("Alice moved to Porto", 600), ("I love chess", 900), ("ok", 1200)]
    paths = [tmp_path / "a.db", tmp_path / "b.db"]
    for p in paths:
        with open_store(p) as s:
            for t, dt in texts:
                ingest(s, EventInput(text=t, sender="Alice", timestamp=T0 + dt), GateConfig(tau=None))
    with open_store(paths[0]) as s:
        report = run_batch(s)
        assert run_batch(s) | {"episodes": 0, "surprise_scored": 0} == dict.fromkeys(report, 0)
    with open_store(paths[1]) as s:
        eps = rebuild_episodes(s)
        sums, cons, tl = consolidator.consolidate(s)
        scored = predictive.build_surprise_index(s)
        refreshed = engram.update_engrams(s)
    assert report == {"episodes": len(eps), "summaries": len(sums), "contradictions": len(cons),
                      "timeline_assertions": len(tl), "surprise_scored": scored, "engrams_refreshed": refreshed}


def test_empty_batch(store):
    assert set(run_batch(store).values()) == {0}


def test_engine_facade(tmp_path):
    cfg = EngineConfig(gate=GateConfig(tau=None))
    with verbmem.open(tmp_path / "e.db", cfg) as eng:
        eng.ingest({"text": "Quarterly report due Friday", "sender": "Bob", "timestamp": T0})
        eng.ingest_many([EventInput(text="Hiking trip in May", sender="Alice", timestamp=T0 + 5)])
        assert eng.query("report")[0].event.text == "Quarterly report due Friday"
        assert eng.stats()["events"] == 2
        eng.run_batch()
    assert isinstance(eng, Engine)


def test_config_file_and_env(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[gate]\ntau = disabled\noffset.correction = -0.1\n[fusion]\nfinal_k = 5\n"
                   "[salience]\nscore.noise = 0.5\n[engine]\nembedder = word-hash-256\n")
    cfg = load_config(ini, env={"TRUEMEMORY_ALPHA_SURPRISE": "0.5"})
    assert cfg.gate.disabled and cfg.gate.category_offsets["correction"] == -0.1
    assert cfg.fusion.final_k == 5 and cfg.fusion.alpha_surprise == 0.5
    assert cfg.salience.category_scores["noise"] == 0.5
    assert cfg.embedder == "word-hash-256"
    assert load_config(env={}).fusion.alpha_surprise == 0.2
    bad = tmp_path / "bad.ini"
    bad.write_text("[gate]\nnonsense = 1\n")
    with pytest.raises(ValueError):
        load_config(bad, env={})


def test_sep_search_with_many_senders(store):
    gate_off = GateConfig(tau=None)
    for i, name in enumerate(["Ann", "Ben", "Cid", "Dot", "Eve", "Fay", "Gus"]):
        ingest(store, EventInput(text=f"{name} brought snacks to the picnic", sender=name, timestamp=T0 + i), gate_off)
    ingest(store, EventInput(text="the picnic blanket was blue", sender="Gus", recipient="Ann", timestamp=T0 + 9),
           gate_off)
    stages = []
    query(store, "what did Ann say about the picnic?", trace=lambda s, a, b: stages.append(s))
    assert "separation" in stages
