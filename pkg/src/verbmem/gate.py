"""Ingestion-time encoding gate.

Three signals per incoming event:

* novelty: compression cost of the event given its nearest stored neighbours,
  ``(|z(M + e)| - |z(M)|) / |z(e)|`` with raw DEFLATE at level 6;
* salience: ``hybrid_salience`` of the event in isolation;
* prediction error: ``1 - cos(embed(e [SEP] m1), embed(m1 [SEP] m1))`` against
  the single nearest memory ``m1``.

The weighted mean of the three is compared with ``tau`` plus a per-category
offset, after a hard salience floor.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from verbmem import dense
from verbmem.models import EventInput, GateSignals
from verbmem.salience import DEFAULT_CONFIG as DEFAULT_SALIENCE
from verbmem.salience import SalienceConfig, hybrid_salience, speech_act

if TYPE_CHECKING:
    from verbmem.substrate import Store

COMPRESS_LEVEL = 6
SHORT_COMPRESSED_BYTES = 10
SHORT_NOVELTY = 0.05
SEP = " [SEP] "

DEFAULT_OFFSETS = {"correction": -0.06, "decision": -0.04, "relationship": -0.04}


@dataclass
class GateConfig:
    lambda_n: float = 0.25
    lambda_s: float = 0.20
    lambda_pi: float = 0.30
    tau: Optional[float] = 0.30          # None disables the gate (admit everything)
    salience_floor: float = 0.10
    category_offsets: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_OFFSETS))
    neighbor_count: int = 5
    relevance_cutoff: float = 0.15
    reject_log: Optional[str] = None     # JSONL path; off by default

    def __post_init__(self) -> None:
        weights = (self.lambda_n, self.lambda_s, self.lambda_pi)
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("gate weights must be non-negative with a positive sum")
        if not 0.0 <= self.salience_floor <= 1.0:
            raise ValueError("salience_floor must lie in [0, 1]")
        if self.neighbor_count < 1:
            raise ValueError("neighbor_count must be >= 1")

    @property
    def disabled(self) -> bool:
        return self.tau is None or self.tau == -math.inf


def deflate_size(data: bytes) -> int:
    comp = zlib.compressobj(COMPRESS_LEVEL, zlib.DEFLATED, -15)
    return len(comp.compress(data) + comp.flush())


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def compression_novelty(memory_text: str, text: str) -> float:
    """Novelty of ``text`` against a fixed memory context (no store access)."""
    z_e = deflate_size(text.encode("utf-8"))
    if z_e < SHORT_COMPRESSED_BYTES:
        return SHORT_NOVELTY
    m = memory_text.encode("utf-8")
    return _clamp((deflate_size(m + text.encode("utf-8")) - deflate_size(m)) / z_e)


def _neighbors(store: "Store", text: str, k: int) -> list[tuple[str, float]]:
    from verbmem.substrate import get_events

    hits = dense.search_dense(store, text, k)
    events = get_events(store, [h.event_id for h in hits])
    return [(events[h.event_id].text, h.cosine) for h in hits]


def novelty(store: "Store", text: str, config: Optional[GateConfig] = None) -> float:
    config = config or GateConfig()
    if store.event_count() == 0:
        return 1.0
    if deflate_size(text.encode("utf-8")) < SHORT_COMPRESSED_BYTES:
        return SHORT_NOVELTY
    memory = "\n".join(t for t, _ in _neighbors(store, text, config.neighbor_count))
    return compression_novelty(memory, text)


def pair_prediction_error(store: "Store", text: str, nearest: str) -> float:
    v_cross = dense.embed_text(store, text + SEP + nearest)
    v_self = dense.embed_text(store, nearest + SEP + nearest)
    return _clamp(1.0 - float(np.dot(v_cross, v_self)))


def prediction_error(
    store: "Store",
    text: str,
    config: Optional[GateConfig] = None,
    salience_config: Optional[SalienceConfig] = None,
) -> float:
    config = config or GateConfig()
    # noise exits before any embedding work
    if speech_act(text, salience_config or DEFAULT_SALIENCE) == "noise":
        return 0.0
    if store.event_count() == 0:
        return 0.0
    nearest = _neighbors(store, text, 1)
    if not nearest:
        return 0.0
    m1, cosine = nearest[0]
    if cosine < config.relevance_cutoff:
        return 0.0
    if m1 == text:
        return 0.0
    return pair_prediction_error(store, text, m1)


def gate_score(signals: GateSignals, config: GateConfig) -> float:
    num = (
        config.lambda_n * signals.novelty
        + config.lambda_s * signals.salience
        + config.lambda_pi * signals.prediction_error
    )
    return num / (config.lambda_n + config.lambda_s + config.lambda_pi)


def admits(signals: GateSignals, category: str, config: GateConfig) -> bool:
    """Admission rule on precomputed signals."""
    if config.disabled:
        return True
    if signals.salience < config.salience_floor:
        return False
    return gate_score(signals, config) >= config.tau + config.category_offsets.get(category, 0.0)


def compute_signals(
    store: "Store",
    text: str,
    config: GateConfig,
    salience_config: Optional[SalienceConfig] = None,
) -> tuple[GateSignals, str]:
    sal = hybrid_salience(text, salience_config)
    signals = GateSignals(
        novelty=novelty(store, text, config),
        salience=sal.value,
        prediction_error=prediction_error(store, text, config, salience_config),
    )
    return signals, sal.category


def gate_decide(
    store: "Store",
    event_input: EventInput,
    config: GateConfig,
    salience_config: Optional[SalienceConfig] = None,
) -> tuple[bool, Optional[GateSignals], str]:
    """Return ``(admit, signals, category)``.

    With the gate disabled nothing is computed: signals are ``None`` and the
    category is the caller's (or ``statement``).
    """
    if config.disabled:
        return True, None, event_input.category or "statement"
    signals, category = compute_signals(store, event_input.text, config, salience_config)
    return admits(signals, category, config), signals, category
