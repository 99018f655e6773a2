"""Query-time ranking: weighted reciprocal rank fusion, conditional reweighting, reranking.

Fused score of a candidate ``d`` over rank lists ``r``::

    RRF(d) = sum_r w_r / (k + rank_r(d)),   k = 60

with ``w_fts = w_vec = 1`` and ``w_sep = 0.8 * w_vec``. The separation list
only counts when the corpus has more than ``sep_min_senders`` distinct senders.

Reweighting then applies, in order: temporal boost, personality-prior
injection, minimum-salience drop, surprise boost. A factor whose trigger is
false leaves scores untouched. Reranking scores ``(query, text)`` pairs and
multiplies by a modality factor for summary rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Protocol, Sequence

from verbmem.text import tokenize

logger = logging.getLogger(__name__)

SOURCES = ("fts", "vec", "sep")


@dataclass
class FusionConfig:
    k_rrf: float = 60.0
    w_fts: float = 1.0
    w_vec: float = 1.0
    w_sep_factor: float = 0.8
    sep_min_senders: int = 5
    alpha_surprise: float = 0.2
    temporal_boost: float = 1.3
    profile_inject_factor: float = 0.8
    style_inject_factor: float = 0.9
    style_inject_count: int = 3
    min_salience: float = 0.05
    modality_detail_penalty: float = 0.7
    modality_synthesis_boost: float = 1.2
    prerank_window: int = 100
    final_k: int = 10

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"fusion setting {name} must be positive (got {value!r})")

    @property
    def w_sep(self) -> float:
        return self.w_sep_factor * self.w_vec


@dataclass
class Candidate:
    event_id: int
    source_ranks: dict[str, Optional[int]] = field(default_factory=lambda: dict.fromkeys(SOURCES))
    score: float = 0.0
    modality: str = "message"
    salience: float = 1.0
    sigma: float = 0.0
    timestamp: int = 0
    text: str = ""
    injected: Optional[str] = None       # "profile" / "style" for injected personality rows
    prerank_score: Optional[float] = None


@dataclass(frozen=True)
class QueryIntent:
    temporal: bool = False
    personality: bool = False
    question_type: str = "general"       # detail | synthesis | general
    time_window: Optional[tuple[int, int]] = None
    focal_entity: Optional[str] = None

    def __post_init__(self) -> None:
        if self.time_window is not None and not self.temporal:
            raise ValueError("a time window implies temporal intent")
        if self.question_type not in ("detail", "synthesis", "general"):
            raise ValueError(f"unknown question type {self.question_type!r}")


def _ranks(hits: Iterable) -> list[tuple[int, int]]:
    return [(h.event_id, h.rank) for h in hits]


def rrf_fuse(
    lexical_hits: Sequence,
    dense_hits: Sequence,
    sep_hits: Optional[Sequence] = None,
    config: Optional[FusionConfig] = None,
    *,
    distinct_senders: int = 0,
) -> list[Candidate]:
    """Weighted RRF over the lexical, dense and (gated) separation lists.

    Each hit needs ``event_id`` and a 1-based ``rank``. Output is sorted by
    fused score, ties by ascending event id.
    """
    config = config or FusionConfig()
    lists = [("fts", config.w_fts, lexical_hits), ("vec", config.w_vec, dense_hits)]
    if sep_hits and distinct_senders > config.sep_min_senders:
        lists.append(("sep", config.w_sep, sep_hits))
    fused: dict[int, Candidate] = {}
    for source, weight, hits in lists:
        for event_id, rank in _ranks(hits):
            cand = fused.get(event_id)
            if cand is None:
                cand = fused[event_id] = Candidate(event_id)
            cand.source_ranks[source] = rank
            cand.score += weight / (config.k_rrf + rank)
    return sort_candidates(fused.values())


def sort_candidates(candidates: Iterable[Candidate]) -> list[Candidate]:
    return sorted(candidates, key=lambda c: (-c.score, c.event_id))


def in_window(ts: int, window: Optional[tuple[int, int]]) -> bool:
    return window is not None and window[0] <= ts <= window[1]


def reweight(
    candidates: list[Candidate],
    intent: QueryIntent,
    config: Optional[FusionConfig] = None,
    *,
    profile_candidates: Sequence[Candidate] = (),
    style_candidates: Sequence[Candidate] = (),
    surprise_built: bool = False,
) -> list[Candidate]:
    """Apply the conditional factors in sequence; returns a new sorted list.

    ``profile_candidates`` and ``style_candidates`` are the personality-prior rows to
    inject on personality intent (already hydrated; their incoming score is
    ignored). ``surprise_built`` gates the surprise boost.
    """
    config = config or FusionConfig()
    out = list(candidates)

    if intent.temporal and intent.time_window is not None:
        for c in out:
            if in_window(c.timestamp, intent.time_window):
                c.score *= config.temporal_boost

    if intent.personality and (profile_candidates or style_candidates):
        top = max((c.score for c in out), default=0.0)
        present = {c.event_id for c in out}
        for group, factor, kind in (
            (profile_candidates, config.profile_inject_factor, "profile"),
            (style_candidates, config.style_inject_factor, "style"),
        ):
            for c in group:
                if c.event_id in present:
                    continue
                c.score = factor * top
                c.injected = kind
                out.append(c)
                present.add(c.event_id)

    out = [c for c in out if c.salience >= config.min_salience]

    if surprise_built:
        for c in out:
            if c.sigma > 0:
                c.score *= 1.0 + config.alpha_surprise * c.sigma

    return sort_candidates(out)


class Reranker(Protocol):
    name: str

    def score(self, query: str, candidate: Candidate) -> float: ...


_SUFFIXES = ("ing", "ed", "es", "s")


def light_stem(token: str) -> str:
    """Strip one inflectional suffix, then a trailing "e" (live, lives, lived -> liv)."""
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            token = token[: -len(suffix)]
            break
    if token.endswith("e") and len(token) > 3:
        token = token[:-1]
    return token


class OverlapReranker:
    """IDF-weighted fraction of query tokens present in the candidate text.

    Tokens match after light suffix stripping ("lives" matches "live");
    weights come from the store's unstemmed document frequencies.
    """

    name = "idf-overlap"

    def __init__(self, idf: Callable[[str], float]):
        self._idf = idf

    def score(self, query: str, candidate: Candidate) -> float:
        terms = list(dict.fromkeys(tokenize(query)))
        if not terms:
            return 0.0
        doc = {light_stem(t) for t in tokenize(candidate.text)}
        weights = [self._idf(t) for t in terms]
        total = sum(weights)
        if total <= 0:
            return 0.0
        return sum(w for t, w in zip(terms, weights) if light_stem(t) in doc) / total


class IdentityReranker:
    """Returns the pre-rerank score unchanged."""

    name = "identity"

    def score(self, query: str, candidate: Candidate) -> float:
        return candidate.score


def modality_factor(modality: str, question_type: str, config: FusionConfig) -> float:
    if modality != "summary":
        return 1.0
    if question_type == "detail":
        return config.modality_detail_penalty
    if question_type == "synthesis":
        return config.modality_synthesis_boost
    return 1.0


def rerank(
    query: str,
    candidates: list[Candidate],
    reranker: Optional[Reranker],
    config: Optional[FusionConfig] = None,
    *,
    question_type: str = "general",
    k: Optional[int] = None,
) -> list[Candidate]:
    """Score pairs, apply the modality factor, return the top ``k`` (default ``final_k``).

    Without a reranker the reweighted order is kept as is. A pair whose
    scoring raises keeps its pre-rerank score. Sort ties fall back to the
    pre-rerank score, then ascending event id.
    """
    config = config or FusionConfig()
    k = config.final_k if k is None else k
    if len(candidates) > config.prerank_window:
        raise ValueError(f"{len(candidates)} candidates exceed the pre-rerank window {config.prerank_window}")
    if reranker is None:
        return sort_candidates(candidates)[:k]
    for c in candidates:
        c.prerank_score = c.score
        try:
            value = float(reranker.score(query, c))
            if math.isnan(value):
                raise ValueError("reranker returned NaN")
        except Exception:
            logger.warning("reranker %s failed on event %d; keeping pre-rerank score", reranker.name, c.event_id)
            continue
        c.score = value * modality_factor(c.modality, question_type, config)
    ranked = sorted(candidates, key=lambda c: (-c.score, -(c.prerank_score or 0.0), c.event_id))
    return ranked[:k]
