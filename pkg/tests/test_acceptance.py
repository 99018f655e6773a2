"""Acceptance gate: one check per primary criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import os
import random
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from oracles import bm25, hashed_vector, rrf  # noqa: E402

from verbmem.bench import (  # noqa: E402
    auc_all_pairs, auc_rank_sum, eval_retrieval, generate_corpus, ingest_corpus, labeled_stream, sweep_gate,
)
from verbmem.bench.sweep import best  # noqa: E402
from verbmem.consolidator import consolidate, load_timeline  # noqa: E402
from verbmem.dense import HashEmbedder, ngram_vector, normalize, search_dense  # noqa: E402
from verbmem.engine import ingest, query, run_batch  # noqa: E402
from verbmem.engram import load_style_vector, update_engrams  # noqa: E402
from verbmem.fusion import Candidate, QueryIntent, reweight, rrf_fuse  # noqa: E402
from verbmem.gate import (  # noqa: E402
    GateConfig, admits, gate_score, novelty, pair_prediction_error, prediction_error,
)
from verbmem.lexical import search_lexical  # noqa: E402
from verbmem.models import EventInput, GateSignals  # noqa: E402
from verbmem.predictive import build_surprise_index, load_surprise  # noqa: E402
from verbmem.substrate import append_event, append_events, list_events, open_store  # noqa: E402

T0 = 1_700_000_000


def verdict(name, ok, detail, elapsed, limit=None):
    within = limit is None or elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    budget = f" (limit {limit:g}s)" if limit is not None else ""
    line = f"{status} {name}: {detail}; {elapsed:.2f}s{budget}"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    return ok and within, line


def check(name, limit=None):
    def wrap(fn):
        def run(tmp_path):
            start = time.perf_counter()
            ok, detail = fn(tmp_path)
            passed, line = verdict(name, ok, detail, time.perf_counter() - start, limit)
            assert passed, line
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


@check("gate score formula and category offsets", limit=1)
def test_gate_formula(tmp_path):
    cfg = GateConfig()
    score = gate_score(GateSignals(0.8, 0.5, 0.6), cfg)
    border = GateSignals(0.25, 0.25, 0.25)
    flips = admits(border, "correction", cfg) and not admits(border, "statement", cfg)
    ok = abs(score - 0.64) <= 1e-12 and abs(gate_score(border, cfg) - 0.25) <= 1e-12 and flips
    return ok, f"score={score!r}, borderline correction admit / statement reject={flips}"


@check("novelty boundary cases and duplicate ordering", limit=5)
def test_novelty(tmp_path):
    rng = random.Random(7)
    with open_store(tmp_path / "empty.db") as s:
        empty = novelty(s, "anything at all goes here")
    ordered = 0
    short = None
    for i in range(50):
        with open_store(tmp_path / f"n{i}.db") as s:
            memory = " ".join(rng.choice(["dinner", "train", "budget", "garden", "movie", "office", "friday"])
                              for _ in range(rng.randint(6, 14))) + f" number {i}"
            append_event(s, EventInput(text=memory, timestamp=T0))
            fresh = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789 ") for _ in range(len(memory)))
            ordered += novelty(s, memory) < novelty(s, fresh)
            if short is None:
                short = novelty(s, "ok")
    ok = empty == 1.0 and short == 0.05 and ordered == 50
    return ok, f"empty={empty}, short={short}, ordered pairs={ordered}/50"


class _Counting(HashEmbedder):
    calls = 0

    def embed(self, text):
        type(self).calls += 1
        return super().embed(text)


@check("prediction error identity and noise exit", limit=1)
def test_prediction_error(tmp_path):
    with open_store(tmp_path / "p.db", _Counting()) as s:
        text = "The quarterly budget review moved to Thursday afternoon"
        append_event(s, EventInput(text=text, timestamp=T0))
        ident = prediction_error(s, text)
        pair = pair_prediction_error(s, text, text)
        _Counting.calls = 0
        noise = prediction_error(s, "ok")
        calls = _Counting.calls
    ok = abs(ident) <= 1e-9 and abs(pair) <= 1e-9 and noise == 0.0 and calls == 0
    return ok, f"pi(identical)={ident}, pi(pair)={pair:.2e}, noise pi={noise}, embedder calls={calls}"


def _hits(ids):
    from types import SimpleNamespace
    return [SimpleNamespace(event_id=i, rank=r) for r, i in enumerate(ids, start=1)]


@check("weighted reciprocal rank fusion", limit=1)
def test_rrf(tmp_path):
    rng = random.Random(11)
    worst = 0.0
    for _ in range(20):
        lex = rng.sample(range(1, 80), rng.randint(0, 40))
        vec = rng.sample(range(1, 80), rng.randint(0, 40))
        sep = rng.sample(range(1, 80), rng.randint(1, 15))
        senders = rng.choice([2, 5, 6, 12])
        got = {c.event_id: c.score for c in rrf_fuse(_hits(lex), _hits(vec), _hits(sep), distinct_senders=senders)}
        use_sep = senders > 5
        expect = rrf([lex, vec] + ([sep] if use_sep else []), [1.0, 1.0] + ([0.8] if use_sep else []))
        if set(got) != set(expect):
            return False, "candidate sets differ"
        worst = max(worst, max((abs(got[i] - expect[i]) for i in got), default=0.0))
    lex, vec = [3, 1, 4], [1, 5, 9]
    plain = {d: sum(1 / (60 + l.index(d) + 1) for l in (lex, vec) if d in l) for d in set(lex) | set(vec)}
    uniform = {c.event_id: c.score for c in rrf_fuse(_hits(lex), _hits(vec))}
    uniform_ok = all(abs(uniform[d] - plain[d]) <= 1e-12 for d in plain)
    gated = {c.event_id for c in rrf_fuse(_hits([1]), _hits([2]), _hits([3]), distinct_senders=5)}
    opened = {c.event_id for c in rrf_fuse(_hits([1]), _hits([2]), _hits([3]), distinct_senders=6)}
    trigger_ok = 3 not in gated and 3 in opened
    ok = worst <= 1e-9 and uniform_ok and trigger_ok
    return ok, f"max error over 20 scenarios={worst:.1e}, uniform form={uniform_ok}, sender trigger={trigger_ok}"


@check("reweighting factors compose")
def test_reweight(tmp_path):
    rng = random.Random(5)
    cands = [Candidate(i, score=rng.random(), sigma=rng.random(), salience=rng.uniform(0.1, 1.0), timestamp=i)
             for i in range(1, 101)]
    before = {c.event_id: c.score for c in cands}
    same = {c.event_id: c.score for c in reweight([Candidate(**vars(c)) for c in cands], QueryIntent())}
    bitwise = same == before
    boosted = {c.event_id: c.score for c in reweight(cands, QueryIntent(), surprise_built=True)}
    sigma = {c.event_id: c.sigma for c in cands}
    worst = max(abs(boosted[i] - before[i] * (1 + 0.2 * sigma[i])) for i in before)
    ok = bitwise and worst <= 1e-15
    return ok, f"identity bitwise={bitwise}, surprise boost max error={worst:.1e} on 100 candidates"


@check("index search equals brute-force oracles", limit=30)
def test_oracle_equivalence(tmp_path):
    words = ("alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi omicron pi rho sigma tau "
             "upsilon phi chi psi omega lisbon porto hiking coffee meeting friday report garden").split()
    mismatches = 0
    checks = 0
    for seed in range(10):
        rng = random.Random(seed)
        texts = []
        for _ in range(1000):
            if texts and rng.random() < 0.03:
                texts.append(rng.choice(texts))
            else:
                texts.append(" ".join(rng.choice(words) for _ in range(rng.randint(1, 10))))
        docs = {i + 1: t for i, t in enumerate(texts)}
        with open_store(tmp_path / f"o{seed}.db") as s:
            append_events(s, [EventInput(text=t, timestamp=T0 + i) for i, t in enumerate(texts)])
            vectors = {i: hashed_vector(t) for i, t in docs.items()}
            for _ in range(3):
                q = " ".join(rng.choice(words) for _ in range(rng.randint(1, 3)))
                expect = [i for i, _ in bm25(docs, q)]
                got = [h.event_id for h in search_lexical(s, q, len(docs))]
                mismatches += got != expect
                qv = hashed_vector(q)
                scored = [(i, sum(a * b for a, b in zip(v, qv))) for i, v in vectors.items()]
                expect = [i for i, _ in sorted(scored, key=lambda kv: (-round(kv[1], 12), kv[0]))][:100]
                got = [h.event_id for h in search_dense(s, q, 100)]
                mismatches += got != expect
                checks += 2
    return mismatches == 0, f"{checks - mismatches}/{checks} rankings identical (lexical full list, dense top 100)"


@check("needle retrieval on the synthetic corpus", limit=60)
def test_needles(tmp_path):
    corpus = generate_corpus(0, 200, 20)
    with open_store(tmp_path / "needle.db") as s:
        ingest_corpus(s, corpus)
        m = eval_retrieval(s, corpus, 10)
    ok = m["recall_at_k"] >= 0.90 and m["mrr"] >= 0.6
    return ok, f"recall@10={m['recall_at_k']:.3f} (>=0.90), MRR={m['mrr']:.3f} (>=0.6)"


@check("disabled gate stores the input stream verbatim")
def test_gate_off_parity(tmp_path):
    rng = random.Random(9)
    alphabet = "abcdefghij KLMNOP 0123 ,.!?' éß漢字🙂\t"
    inputs = []
    for i in range(1000):
        inputs.append(EventInput(
            text="".join(rng.choice(alphabet) for _ in range(rng.randint(1, 60))),
            sender=rng.choice(["", "Ann", "Bo", "Çelik"]),
            recipient=rng.choice([None, "Ann", "Zoë"]),
            timestamp=T0 + rng.randint(0, 10 ** 6),
            category=rng.choice([None, "statement", "question", "noise", "commitment"]),
        ))
    with open_store(tmp_path / "parity.db") as s:
        admitted = sum(ingest(s, e, GateConfig(tau=None)).admitted for e in inputs)
        stored = sorted(list_events(s), key=lambda e: e.id)
    same = len(stored) == len(inputs) and all(
        ev.text.encode() == inp.text.encode() and ev.sender == inp.sender and ev.recipient == inp.recipient
        and ev.timestamp == inp.timestamp and ev.category == (inp.category or "statement") and ev.signal_tags is None
        for ev, inp in zip(stored, inputs)
    )
    return admitted == 1000 and same, f"admitted {admitted}/1000, stored stream identical={same}"


@check("close and reopen gives identical query results in one file")
def test_persistence(tmp_path):
    folder = tmp_path / "persist"
    folder.mkdir()
    path = folder / "memory.db"
    corpus = generate_corpus(4, 200, 20)
    rng = random.Random(4)
    queries = [q for q, _ in corpus.queries] + [
        " ".join(rng.choice(e["text"].split()) for _ in range(3)) for e in rng.sample(corpus.events, 30)
    ]
    with open_store(path) as s:
        ingest_corpus(s, corpus)
        run_batch(s)
        first = [[(r.event.id, r.score) for r in query(s, q)] for q in queries]
    with open_store(path) as s:
        second = [[(r.event.id, r.score) for r in query(s, q)] for q in queries]
    files = sorted(os.listdir(folder))
    ok = len(queries) == 50 and first == second and files == ["memory.db"]
    return ok, f"{sum(a == b for a, b in zip(first, second))}/{len(queries)} queries identical, files on disk={files}"


@check("gate sweep AUC harness")
def test_auc(tmp_path):
    rng = random.Random(2)
    worst = 0.0
    for n in (2, 5, 20, 60, 120, 200):
        scores = [rng.choice([0.0, 0.5, 1.0, rng.random()]) for _ in range(n)]
        labels = [rng.randint(0, 1) for _ in range(n)]
        labels[0], labels[-1] = 0, 1
        worst = max(worst, abs(auc_rank_sum(scores, labels) - auc_all_pairs(scores, labels)))
    stream = labeled_stream(0, 300)
    top = best(sweep_gate([t for t, _ in stream], [l for _, l in stream]))
    ok = worst <= 1e-9 and top.auc >= 0.95
    return ok, (f"rank-sum vs all-pairs max diff={worst:.1e}; best AUC={top.auc:.4f} at "
                f"(n,s,pi)=({top.lambda_n},{top.lambda_s},{top.lambda_pi})")


@check("batch stage invariants")
def test_batch_invariants(tmp_path):
    corpus = generate_corpus(1, 200, 20)
    rng = random.Random(1)
    cities = ["Lisbon", "Porto", "Madrid", "Rome", "Oslo"]
    extra = []
    for i in range(40):
        ts = T0 + rng.randint(0, 30) * 3600
        extra.append({"text": f"{rng.choice(['Alice', 'Bob', 'Carmen'])} lives in {rng.choice(cities)}",
                      "sender": "Dmitri", "timestamp": ts})
    with open_store(tmp_path / "batch.db") as s:
        ingest_corpus(s, corpus)
        append_events(s, [EventInput.from_dict(e) for e in extra])
        consolidate(s, window=10_000)
        again = consolidate(s, window=10_000)
        idempotent = again == ([], [], [])
        rows = {t.id: t for t in load_timeline(s)}
        forward = True
        for t in rows.values():
            seen, cur = {t.id}, t
            while cur.superseded_by is not None:
                nxt = rows[cur.superseded_by]
                if nxt.ts <= cur.ts or nxt.id in seen:
                    forward = False
                    break
                seen.add(nxt.id)
                cur = nxt
        build_surprise_index(s)
        sigmas = load_surprise(s)
        in_range = len(sigmas) == s.event_count("message") and all(0.0 <= v <= 1.0 for v in sigmas.values())
        update_engrams(s)
        worst = 0.0
        for sender in {e["sender"] for e in corpus.events}:
            texts = [e.text for e in list_events(s, modality="message") if e.sender == sender]
            direct = normalize(np.mean([ngram_vector(t) for t in texts], axis=0))
            worst = max(worst, float(np.max(np.abs(load_style_vector(s, sender).vector - direct))))
    ok = idempotent and forward and in_range and worst <= 1e-9 and len(rows) > 5
    return ok, (f"timeline rows={len(rows)} forward/acyclic={forward}, re-run idempotent={idempotent}, "
                f"sigma in [0,1] for {len(sigmas)} events={in_range}, style max error={worst:.1e}")


if __name__ == "__main__":
    import tempfile

    results = []
    for fn in [v for k, v in list(globals().items()) if k.startswith("test_") and callable(v)]:
        with tempfile.TemporaryDirectory() as d:
            try:
                fn(Path(d))
                results.append(True)
            except AssertionError:
                results.append(False)
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
