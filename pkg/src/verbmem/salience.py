"""Message salience: a length-routed hybrid of a speech-act classifier and a feature scorer.

Short messages (<= 50 chars) get a fixed score by linguistic function; longer
messages get an additive score over length, numbers, dates and emotional
markers. Everything here is pure and thread-safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from verbmem.text import find_numbers, has_date, tokenize

ROUTE_MAX_CHARS = 50

CATEGORY_SCORES = {
    "commitment": 0.8,
    "correction": 0.6,
    "noise": 0.02,
    "question": 0.2,
    "decision": 0.7,
    "relationship": 0.6,
    "statement": 0.3,
    "other": 0.3,
}

QUESTION_LEADS = frozenset(
    "what when where who whom whose why how which is are am do does did can could "
    "would should shall will won't isn't aren't don't doesn't didn't have has".split()
)
COMMITMENT_PATTERNS = (
    r"\bi(?:'ll| will| shall)\b",
    r"\bwe(?:'ll| will| shall)\b",
    r"\b(?:i'm|i am|we're|we are) going to\b",
    r"\bgonna\b",
    r"\bi promise\b",
    r"\bpromise(?:d)? to\b",
    r"\bi commit\b",
    r"^(?:remember to|don't forget|do not forget|make sure|please)\b",
)
CORRECTION_PATTERNS = (
    r"^actually\b",
    r"\bactually,",
    r"^no,? i meant\b",
    r"\bi meant\b",
    r"\bcorrection\b",
    r"\bsorry,? i meant\b",
    r"\bscratch that\b",
    r"\bnot .{1,30}, but\b",
)
NOISE_WORDS = frozenset(
    "ok okay k kk ok! lol lmao haha hahaha hehe thanks thank thx ty you yes yeah yep yup no nope "
    "sure cool nice great hmm hm mhm uh um oh ah wow omg brb bye hi hello hey yo np gotcha alright "
    "right fine good morning night gn gm see ya later".split()
)
DECISION_PATTERNS = (
    r"\blet's\b",
    r"\blet us\b",
    r"\bwe decided\b",
    r"\bi decided\b",
    r"\bdecision\b",
    r"\bwe agreed\b",
    r"\bwe'll go with\b",
    r"\bsettled on\b",
)
RELATIONSHIP_WORDS = frozenset(
    "mom mother dad father sister brother wife husband son daughter aunt uncle cousin grandma "
    "grandpa grandmother grandfather niece nephew boyfriend girlfriend partner fiance fiancee "
    "friend friends bestie roommate colleague coworker boss neighbor married engaged divorced".split()
)
EMOTION_WORDS = frozenset(
    "love loved hate hated happy sad angry upset excited thrilled scared afraid worried anxious "
    "nervous proud grateful sorry miss missed heartbroken furious devastated delighted amazing "
    "terrible awful wonderful stressed frustrated lonely overwhelmed".split()
)


@dataclass
class SalienceConfig:
    base: float = 0.25
    length_weight: float = 0.2          # applied as weight * min(len / length_scale, 1)
    length_scale: float = 200.0
    number_weight: float = 0.1
    number_cap: float = 0.2
    date_bonus: float = 0.15
    emotion_bonus: float = 0.1
    category_scores: dict[str, float] = field(default_factory=lambda: dict(CATEGORY_SCORES))
    noise_words: frozenset[str] = NOISE_WORDS
    relationship_words: frozenset[str] = RELATIONSHIP_WORDS
    emotion_words: frozenset[str] = EMOTION_WORDS


DEFAULT_CONFIG = SalienceConfig()


@dataclass(frozen=True)
class SalienceScore:
    value: float
    category: str


def _any(patterns: tuple[str, ...], text: str) -> bool:
    return any(re.search(p, text) for p in patterns)


def speech_act(text: str, config: SalienceConfig = DEFAULT_CONFIG) -> str:
    """Category of ``text`` by the ordered rule list (first match wins)."""
    lowered = text.strip().lower()
    tokens = tokenize(lowered)
    if not tokens:
        return "noise"
    if lowered.endswith("?") or tokens[0] in QUESTION_LEADS and len(tokens) > 1:
        return "question"
    if _any(COMMITMENT_PATTERNS, lowered):
        return "commitment"
    if _any(CORRECTION_PATTERNS, lowered):
        return "correction"
    if all(t in config.noise_words for t in tokens):
        return "noise"
    if _any(DECISION_PATTERNS, lowered):
        return "decision"
    if any(t in config.relationship_words for t in tokens):
        return "relationship"
    return "statement"


def classify_speech_act(text: str, config: SalienceConfig = DEFAULT_CONFIG) -> tuple[str, float]:
    category = speech_act(text, config)
    return category, config.category_scores[category]


def compute_message_salience(text: str, config: SalienceConfig = DEFAULT_CONFIG) -> SalienceScore:
    """Additive feature score clamped to [0, 1]; the empty string scores 0."""
    category = speech_act(text, config)
    if not text:
        return SalienceScore(0.0, category)
    score = config.base
    score += config.length_weight * min(len(text) / config.length_scale, 1.0)
    score += min(config.number_weight * len(find_numbers(text)), config.number_cap)
    if has_date(text):
        score += config.date_bonus
    if any(t in config.emotion_words for t in tokenize(text)):
        score += config.emotion_bonus
    return SalienceScore(min(max(score, 0.0), 1.0), category)


def hybrid_salience(text: str, config: Optional[SalienceConfig] = None) -> SalienceScore:
    config = config or DEFAULT_CONFIG
    if len(text) <= ROUTE_MAX_CHARS:
        category, value = classify_speech_act(text, config)
        return SalienceScore(value, category)
    return compute_message_salience(text, config)
