"""Engine configuration from an INI-style file plus environment overrides.

Sections: ``[engine]``, ``[gate]``, ``[fusion]``, ``[salience]``,
``[predictive]``, ``[intent]``. Precedence is defaults < file < environment.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from verbmem.dense import DEFAULT_EMBEDDER
from verbmem.fusion import FusionConfig
from verbmem.gate import GateConfig
from verbmem.predictive import SurpriseConfig
from verbmem.salience import SalienceConfig

ALPHA_ENV = "TRUEMEMORY_ALPHA_SURPRISE"


@dataclass
class IntentConfig:
    personality_words: tuple[str, ...] = (
        "like", "likes", "liked", "prefer", "prefers", "preference", "personality", "style",
        "who is", "favorite", "favourite", "enjoy", "enjoys", "love", "loves", "hate", "hates",
    )
    detail_phrases: tuple[str, ...] = (
        "when", "what date", "which day", "what day", "what time", "how many", "how much",
    )
    synthesis_phrases: tuple[str, ...] = (
        "summarize", "summarise", "summary", "overall", "in general", "overview", "recap",
    )
    temporal_phrases: tuple[str, ...] = (
        "when", "what date", "which day", "what day", "yesterday", "today", "last week", "past week",
        "last month", "past month", "last year", "past year", "this week", "this month", "ago",
    )


@dataclass
class EngineConfig:
    embedder: str = DEFAULT_EMBEDDER
    gate: GateConfig = field(default_factory=GateConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    salience: SalienceConfig = field(default_factory=SalienceConfig)
    predictive: SurpriseConfig = field(default_factory=SurpriseConfig)
    intent: IntentConfig = field(default_factory=IntentConfig)


def _coerce(raw: str, current: Any) -> Any:
    raw = raw.strip()
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, (tuple, frozenset)):
        items = [item.strip() for item in raw.split(",") if item.strip()]
        return type(current)(items)
    return raw


def _parse_tau(raw: str) -> Optional[float]:
    raw = raw.strip().lower()
    if raw in ("disabled", "off", "none", "-inf"):
        return None
    value = float(raw)
    return None if value == -math.inf else value


def _apply_section(obj: Any, section: Mapping[str, str], name: str) -> Any:
    updates: dict[str, Any] = {}
    dict_updates: dict[str, dict[str, float]] = {}
    known = {f.name: f for f in dataclasses.fields(obj)}
    for key, raw in section.items():
        if "." in key:
            prefix, sub = key.split(".", 1)
            target = {"offset": "category_offsets", "score": "category_scores"}.get(prefix, prefix)
            if target not in known:
                raise ValueError(f"[{name}] unknown key {key!r}")
            dict_updates.setdefault(target, dict(getattr(obj, target)))[sub] = float(raw)
            continue
        if key not in known:
            raise ValueError(f"[{name}] unknown key {key!r}")
        if name == "gate" and key == "tau":
            updates[key] = _parse_tau(raw)
        elif key == "reject_log":
            updates[key] = raw.strip() or None
        else:
            updates[key] = _coerce(raw, getattr(obj, key))
    updates.update(dict_updates)
    return dataclasses.replace(obj, **updates)


def load_config(path: Optional[str | Path] = None, env: Optional[Mapping[str, str]] = None) -> EngineConfig:
    """Build an :class:`EngineConfig` from defaults, an optional file, then ``env``."""
    env = os.environ if env is None else env
    config = EngineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keep key case (category names)
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        for section in parser.sections():
            values = dict(parser.items(section))
            if section == "engine":
                for key, raw in values.items():
                    if key != "embedder":
                        raise ValueError(f"[engine] unknown key {key!r}")
                    config.embedder = raw.strip()
            elif section in ("gate", "fusion", "salience", "predictive", "intent"):
                setattr(config, section, _apply_section(getattr(config, section), values, section))
            else:
                raise ValueError(f"unknown config section [{section}]")
    alpha = env.get(ALPHA_ENV)
    if alpha:
        config.fusion = dataclasses.replace(config.fusion, alpha_surprise=float(alpha))
    return config
