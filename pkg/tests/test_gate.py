import random

import pytest
from hypothesis import given, strategies as st

from verbmem.dense import HashEmbedder
from verbmem.gate import (
    GateConfig, admits, compression_novelty, deflate_size, gate_decide, gate_score, novelty,
    pair_prediction_error, prediction_error,
)
from verbmem.models import EventInput, GateSignals
from verbmem.substrate import append_event, open_store

from conftest import T0

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def test_score_hand_value():
    assert gate_score(GateSignals(0.8, 0.5, 0.6), GateConfig()) == pytest.approx(0.64, abs=1e-12)


def test_category_offsets_flip_borderline():
    sig = GateSignals(0.25, 0.25, 0.25)
    cfg = GateConfig()
    assert gate_score(sig, cfg) == pytest.approx(0.25, abs=1e-12)
    assert admits(sig, "correction", cfg)
    assert not admits(sig, "statement", cfg)


def test_floor_rejects_regardless():
    assert not admits(GateSignals(1.0, 0.05, 1.0), "commitment", GateConfig())


def test_disabled_admits_everything():
    assert admits(GateSignals(0.0, 0.0, 0.0), "noise", GateConfig(tau=None))


@given(unit, unit, unit, unit, st.sampled_from(["statement", "correction", "decision", "question"]))
def test_monotone_in_each_signal(n, s, p, bump, category):
    cfg = GateConfig()
    base = GateSignals(n, s, p)
    for raised in (GateSignals(min(1, n + bump), s, p), GateSignals(n, min(1, s + bump), p),
                   GateSignals(n, s, min(1, p + bump))):
        if admits(base, category, cfg):
            assert admits(raised, category, cfg)


@given(unit, unit, unit, st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 5))
def test_score_normalized(n, s, p, a, b, c):
    assert -1e-12 <= gate_score(GateSignals(n, s, p), GateConfig(lambda_n=a, lambda_s=b, lambda_pi=c)) <= 1 + 1e-12


def test_novelty_boundaries(store, add):
    assert novelty(store, "anything at all") == 1.0
    add("some earlier message about the weather")
    short = "ok"
    assert deflate_size(short.encode()) < 10
    assert novelty(store, short) == 0.05


def test_duplicate_less_novel_than_unrelated(tmp_path):
    rng = random.Random(1)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    for i in range(50):
        with open_store(tmp_path / f"n{i}.db") as s:
            memory = " ".join(rng.choice(["dinner", "train", "budget", "garden", "movie", "office"])
                              for _ in range(8)) + f" on day {i}"
            append_event(s, EventInput(text=memory, timestamp=T0))
            noise = "".join(rng.choice(alphabet) for _ in range(len(memory)))
            assert novelty(s, memory) < novelty(s, noise)


def test_compression_novelty_clamped():
    assert 0.0 <= compression_novelty("", "hello there friend") <= 1.0


class CountingEmbedder(HashEmbedder):
    def __init__(self):
        self.calls = 0

    def embed(self, text):
        self.calls += 1
        return super().embed(text)


def test_prediction_error_identity_and_noise_exit(tmp_path):
    emb = CountingEmbedder()
    s = open_store(tmp_path / "p.db", emb)
    text = "The quarterly budget review moved to Thursday afternoon"
    append_event(s, EventInput(text=text, timestamp=T0))
    assert abs(prediction_error(s, text)) <= 1e-9
    assert abs(pair_prediction_error(s, text, text)) <= 1e-9
    emb.calls = 0
    assert prediction_error(s, "ok") == 0.0
    assert emb.calls == 0
    assert prediction_error(s, "The quarterly budget review moved to Friday morning") > 0


def test_prediction_error_relevance_cutoff(store, add):
    add("zzzz qqqq")
    cfg = GateConfig(relevance_cutoff=0.99)
    assert prediction_error(store, "a completely different sentence", cfg) == 0.0


def test_gate_decide(store, add):
    admit, signals, category = gate_decide(store, EventInput(text="ok"), GateConfig())
    assert not admit and signals.salience == 0.02 and category == "noise"
    admit, signals, category = gate_decide(store, EventInput(text="ok"), GateConfig(tau=None))
    assert admit and signals is None


def test_config_validation():
    with pytest.raises(ValueError):
        GateConfig(lambda_n=0, lambda_s=0, lambda_pi=0)
    with pytest.raises(ValueError):
        GateConfig(lambda_n=-1)
