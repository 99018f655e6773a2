"""Shared text primitives: tokenization, sentence splitting, number and date patterns.

Salience scoring, fact fingerprinting and intent detection all read dates and
numbers through this module so the three stay consistent.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+|\n+")

MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11,
    "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}
WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")

_MONTH_ALT = "|".join(sorted(MONTHS, key=len, reverse=True))

# "March 3", "March 3rd, 2024", "3 March 2024", "2024-03-03", "3/14/2024", bare weekdays.
DATE_RE = re.compile(
    rf"\b(?:"
    rf"(?:{_MONTH_ALT})\.?\s+\d{{1,2}}(?:st|nd|rd|th)?(?:,?\s+\d{{4}})?"
    rf"|\d{{1,2}}(?:st|nd|rd|th)?\s+(?:of\s+)?(?:{_MONTH_ALT})(?:,?\s+\d{{4}})?"
    rf"|\d{{4}}-\d{{2}}-\d{{2}}"
    rf"|\d{{1,2}}/\d{{1,2}}(?:/\d{{2,4}})?"
    rf"|(?:{'|'.join(WEEKDAYS)})"
    rf")\b",
    re.IGNORECASE,
)

# Numeric tokens, including attached units/suffixes such as "3pm", "$40", "12.5%".
NUMBER_RE = re.compile(r"(?<![\w.])[$€£]?\d+(?:[.,]\d+)*(?:%|[a-zA-Z]{1,3})?(?![\w])")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens split on non-alphanumeric boundaries (no stemming)."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_RE.split(text) if s and s.strip()]


def find_dates(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group(0)) for m in DATE_RE.finditer(text)]


def find_numbers(text: str, *, skip_dates: bool = True) -> list[str]:
    """Numeric tokens in ``text``; digits that belong to a date are skipped by default."""
    spans = [(s, e) for s, e, _ in find_dates(text)] if skip_dates else []
    out = []
    for m in NUMBER_RE.finditer(text):
        if any(s <= m.start() < e for s, e in spans):
            continue
        out.append(m.group(0))
    return out


def has_date(text: str) -> bool:
    return DATE_RE.search(text) is not None
