"""Embedded conversational memory: verbatim storage, gated ingestion, hybrid retrieval."""

from verbmem.config import EngineConfig, load_config
from verbmem.engine import Engine, IngestResult, QueryResult, detect_intent, ingest, query, run_batch
from verbmem.models import Episode, Event, EventInput, GateSignals
from verbmem.substrate import Store, open_store, stats

open = Engine.open

__all__ = [
    "Engine",
    "EngineConfig",
    "Episode",
    "Event",
    "EventInput",
    "GateSignals",
    "IngestResult",
    "QueryResult",
    "Store",
    "detect_intent",
    "ingest",
    "load_config",
    "open",
    "open_store",
    "query",
    "run_batch",
    "stats",
]

__version__ = "0.1.0"
