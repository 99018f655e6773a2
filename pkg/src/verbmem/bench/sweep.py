"""Gate weight sweep: score a labeled keep/discard stream under many weightings.

Signals are computed once per message against the messages before it (every
message is stored, as with the gate off). Each grid point then only changes
the weighted combination, so AUC is cheap to evaluate across the grid.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from verbmem.bench.metrics import auc_rank_sum
from verbmem.gate import GateConfig, admits, compute_signals, gate_score
from verbmem.models import EventInput, GateSignals
from verbmem.salience import hybrid_salience
from verbmem.substrate import append_event, open_store

WEIGHT_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_TAUS = (0.30,)

_NAMES = ("Alice", "Bob", "Carmen", "Dmitri", "Esther", "Farid", "Grace", "Hiro")
_ITEMS = ("dentist", "tax", "visa", "car service", "vet", "passport", "lease", "insurance")
_DOCS = ("report", "contract", "slides", "invoice", "budget", "draft", "photos", "receipts")
_EVENTS = ("review", "dinner", "standup", "rehearsal", "workshop", "checkup", "recital", "game")
_DAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
_MONTHS = ("January", "February", "March", "April", "May", "June", "July", "August", "September", "October")
_NOISE = ("ok", "lol", "k", "haha", "sure", "yep", "cool", "nice", "thanks", "hmm", "ok!", "lol ok")


@dataclass(frozen=True)
class SweepResult:
    lambda_n: float
    lambda_s: float
    lambda_pi: float
    tau: Optional[float]
    auc: Optional[float]          # None when the labels hold a single class
    admit_rate: float
    accuracy: float

    def to_row(self) -> dict:
        return {
            "lambda_n": self.lambda_n, "lambda_s": self.lambda_s, "lambda_pi": self.lambda_pi,
            "tau": "disabled" if self.tau is None else self.tau,
            "auc": "undefined" if self.auc is None else round(self.auc, 12),
            "admit_rate": round(self.admit_rate, 12), "accuracy": round(self.accuracy, 12),
        }


def _keep_message(rng: random.Random) -> str:
    kind = rng.randrange(3)
    name = rng.choice(_NAMES)
    if kind == 0:
        return (f"{name}'s {rng.choice(_ITEMS)} appointment is on {rng.choice(_MONTHS)} {rng.randint(1, 28)} "
                f"at {rng.randint(1, 11)}pm in room {rng.randint(100, 999)}.")
    if kind == 1:
        return f"I will send {name} the {rng.choice(_DOCS)} by {rng.choice(_DAYS)}, {rng.randint(2, 9)} copies."
    first, second = rng.sample(_DAYS, 2)
    return f"Actually, the {rng.choice(_EVENTS)} with {name} is on {first}, not {second}, at {rng.randint(1, 11)}pm."


def labeled_stream(seed: int, n: int = 300, keep_rate: float = 0.5) -> list[tuple[str, int]]:
    """Deterministic stream of ``(text, label)``; label 1 = keep.

    Keeps are specific new facts, commitments and corrections. Discards are
    filler acknowledgements and verbatim repeats of earlier keeps.
    """
    rng = random.Random(seed)
    out: list[tuple[str, int]] = []
    kept: list[str] = []
    for _ in range(n):
        if not kept or rng.random() < keep_rate:
            text = _keep_message(rng)
            kept.append(text)
            out.append((text, 1))
        elif rng.random() < 0.5:
            out.append((rng.choice(kept), 0))
        else:
            out.append((rng.choice(_NOISE), 0))
    return out


def stream_signals(texts: Sequence[str], config: Optional[GateConfig] = None, embedder=None) -> list[GateSignals]:
    """Signals for each message against all earlier ones, using a throwaway in-memory store."""
    config = config or GateConfig()
    store = open_store(":memory:", embedder)
    try:
        out = []
        for text in texts:
            signals, _ = compute_signals(store, text, config)
            out.append(signals)
            append_event(store, EventInput(text=text))
        return out
    finally:
        store.close()


def default_grid(levels: Sequence[float] = WEIGHT_LEVELS, taus: Sequence[Optional[float]] = DEFAULT_TAUS) -> list[GateConfig]:
    """Every weight triple over ``levels`` (all-zero excluded) plus the default weights, crossed with ``taus``."""
    grid = []
    base = GateConfig()
    triples = {t for t in itertools.product(levels, repeat=3) if sum(t) > 0}
    triples.add((base.lambda_n, base.lambda_s, base.lambda_pi))
    for ln, ls, lp in sorted(triples):
        for tau in taus:
            grid.append(GateConfig(lambda_n=ln, lambda_s=ls, lambda_pi=lp, tau=tau))
    return grid


def sweep_gate(
    texts: Sequence[str],
    labels: Sequence[int],
    grid: Optional[Iterable[GateConfig]] = None,
    signals: Optional[Sequence[GateSignals]] = None,
) -> list[SweepResult]:
    """AUC of the gate score against ``labels`` at every grid point, plus admit rate and accuracy."""
    if len(texts) != len(labels):
        raise ValueError("texts and labels differ in length")
    if any(l not in (0, 1) for l in labels):
        raise ValueError("labels must be binary")
    grid = list(grid) if grid is not None else default_grid()
    signals = list(signals) if signals is not None else stream_signals(texts)
    categories = [hybrid_salience(t).category for t in texts]
    results = []
    for cfg in grid:
        scores = [gate_score(s, cfg) for s in signals]
        decisions = [admits(s, c, cfg) for s, c in zip(signals, categories)]
        n = max(1, len(labels))
        results.append(SweepResult(
            cfg.lambda_n, cfg.lambda_s, cfg.lambda_pi, cfg.tau,
            auc_rank_sum(scores, labels),
            sum(decisions) / n,
            sum(int(d) == l for d, l in zip(decisions, labels)) / n,
        ))
    return results


def best(results: Sequence[SweepResult]) -> Optional[SweepResult]:
    scored = [r for r in results if r.auc is not None]
    return max(scored, key=lambda r: r.auc) if scored else None
