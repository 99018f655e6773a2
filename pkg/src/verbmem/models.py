"""Plain record types shared across the pipeline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Optional

CATEGORIES = (
    "commitment",
    "correction",
    "decision",
    "relationship",
    "question",
    "noise",
    "statement",
    "other",
)
MODALITIES = ("message", "summary", "profile", "timeline")


@dataclass(frozen=True)
class GateSignals:
    novelty: float
    salience: float
    prediction_error: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GateSignals":
        return cls(float(data["novelty"]), float(data["salience"]), float(data["prediction_error"]))


@dataclass
class EventInput:
    """Caller-side description of an event before the store assigns an id."""

    text: str
    sender: str = ""
    recipient: Optional[str] = None
    timestamp: Optional[int] = None
    category: Optional[str] = None
    modality: str = "message"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EventInput":
        if not isinstance(data, dict):
            raise ValueError("event must be a JSON object")
        if "text" not in data or not isinstance(data["text"], str):
            raise ValueError("missing required string field 'text'")
        ts = data.get("timestamp")
        if ts is not None:
            if isinstance(ts, bool) or not isinstance(ts, (int, float)):
                raise ValueError("'timestamp' must be epoch seconds")
            ts = int(ts)
        category = data.get("category")
        if category is not None and category not in CATEGORIES:
            raise ValueError(f"unknown category {category!r}")
        modality = data.get("modality") or "message"
        if modality not in MODALITIES:
            raise ValueError(f"unknown modality {modality!r}")
        return cls(
            text=data["text"],
            sender=str(data.get("sender") or ""),
            recipient=data.get("recipient"),
            timestamp=ts,
            category=category,
            modality=modality,
        )


@dataclass(frozen=True)
class Event:
    id: int
    text: str
    sender: str
    recipient: Optional[str]
    timestamp: int
    category: str
    modality: str
    signal_tags: Optional[GateSignals] = None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["signal_tags"] = self.signal_tags.to_dict() if self.signal_tags else None
        return d


@dataclass(frozen=True)
class Episode:
    id: int
    start_ts: int
    end_ts: int
    event_ids: list[int] = field(default_factory=list)
