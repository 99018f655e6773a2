"""Verbatim event store backed by a single SQLite file.

The store is append-only: event text is written byte-for-byte and never
rewritten. Every append commits the message row, its lexical postings and its
dense vector in one transaction, so a crash mid-append leaves either the whole
event or nothing.

The rollback journal (``journal_mode=DELETE``) is used instead of WAL so that,
outside of an open write transaction, the entire persistent state lives in the
one file at ``path``.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Optional

from verbmem import dense, lexical
from verbmem.errors import (
    CorruptStoreError,
    EmbedderMismatchError,
    EmptyTextError,
    MemoryStoreError,
    SchemaVersionError,
    UnknownEventError,
)
from verbmem.models import CATEGORIES, MODALITIES, Episode, Event, EventInput, GateSignals

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EPISODE_GAP_SECONDS = 6 * 3600

_SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS metadata (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS messages (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    text        TEXT NOT NULL,
    sender      TEXT NOT NULL DEFAULT '',
    recipient   TEXT,
    timestamp   INTEGER NOT NULL CHECK(timestamp >= 0),
    category    TEXT NOT NULL DEFAULT 'statement',
    modality    TEXT NOT NULL DEFAULT 'message',
    signal_tags TEXT,                -- JSON {novelty, salience, prediction_error}
    token_count INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS idx_messages_ts ON messages(timestamp, id);
CREATE INDEX IF NOT EXISTS idx_messages_sender ON messages(sender);

-- lexical index: one posting per (term, event)
CREATE TABLE IF NOT EXISTS lex_postings (
    term     TEXT NOT NULL,
    event_id INTEGER NOT NULL,
    tf       INTEGER NOT NULL,
    PRIMARY KEY (term, event_id)
) WITHOUT ROWID;

-- dense index: float64 little-endian, unit norm
CREATE TABLE IF NOT EXISTS vec_messages (
    event_id INTEGER PRIMARY KEY,
    vector   BLOB NOT NULL
);

CREATE TABLE IF NOT EXISTS episodes (
    id        INTEGER PRIMARY KEY,
    start_ts  INTEGER NOT NULL,
    end_ts    INTEGER NOT NULL,
    event_ids TEXT NOT NULL          -- JSON array
);

CREATE TABLE IF NOT EXISTS entity_profiles (
    entity     TEXT PRIMARY KEY,
    attributes TEXT NOT NULL,        -- JSON object
    updated_ts INTEGER NOT NULL,
    event_id   INTEGER               -- materialized profile event
);

CREATE TABLE IF NOT EXISTS entity_style_vectors (
    entity        TEXT PRIMARY KEY,
    vector        BLOB NOT NULL,
    message_count INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS surprise_scores (
    event_id INTEGER PRIMARY KEY,
    sigma    REAL NOT NULL CHECK(sigma >= 0 AND sigma <= 1)
);

CREATE TABLE IF NOT EXISTS summaries (
    id               INTEGER PRIMARY KEY AUTOINCREMENT,
    cluster_key      TEXT NOT NULL UNIQUE,
    event_id         INTEGER NOT NULL,
    source_event_ids TEXT NOT NULL,
    created_ts       INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS contradictions (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    entity      TEXT NOT NULL,
    predicate   TEXT NOT NULL,
    event_id_a  INTEGER NOT NULL,
    event_id_b  INTEGER NOT NULL,
    detected_ts INTEGER NOT NULL,
    UNIQUE (entity, predicate, event_id_a, event_id_b)
);
CREATE INDEX IF NOT EXISTS idx_contradictions_key ON contradictions(entity, predicate);

CREATE TABLE IF NOT EXISTS timeline (
    id            INTEGER PRIMARY KEY AUTOINCREMENT,
    entity        TEXT NOT NULL,
    predicate     TEXT NOT NULL,
    value         TEXT NOT NULL,
    event_id      INTEGER NOT NULL,
    ts            INTEGER NOT NULL,
    superseded_by INTEGER,
    UNIQUE (entity, predicate, event_id)
);
CREATE INDEX IF NOT EXISTS idx_timeline_key ON timeline(entity, predicate, ts);

-- reserved; nothing populates these yet
CREATE TABLE IF NOT EXISTS landmark_events (
    id       INTEGER PRIMARY KEY,
    event_id INTEGER NOT NULL,
    kind     TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS causal_edges (
    cause_event_id  INTEGER NOT NULL,
    effect_event_id INTEGER NOT NULL,
    PRIMARY KEY (cause_event_id, effect_event_id)
);
CREATE TABLE IF NOT EXISTS entity_relationships (
    entity_a TEXT NOT NULL,
    entity_b TEXT NOT NULL,
    tier     INTEGER,
    PRIMARY KEY (entity_a, entity_b)
);
"""

_EVENT_COLUMNS = "id, text, sender, recipient, timestamp, category, modality, signal_tags"


class Store:
    """Handle on one store file.

    Single writer, many readers. Writes serialize on an internal lock; a handle
    may move between threads but should not be driven from two at once without
    external coordination.
    """

    def __init__(self, path: Path, conn: sqlite3.Connection, embedder: dense.Embedder, schema_version: int):
        self.path = path
        self.conn = conn
        self.embedder = embedder
        self.schema_version = schema_version
        self._lock = threading.RLock()
        self._dense_cache: Optional[tuple[Any, Any]] = None
        # test hook: called with a step name inside the append transaction
        self._fault_hook: Optional[Callable[[str], None]] = None

    @property
    def embedder_identity(self) -> str:
        return self.embedder.name

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    @contextmanager
    def transaction(self) -> Iterator[sqlite3.Connection]:
        with self._lock:
            self.conn.execute("BEGIN IMMEDIATE")
            try:
                yield self.conn
            except BaseException:
                self.conn.execute("ROLLBACK")
                self._dense_cache = None
                raise
            else:
                self.conn.execute("COMMIT")

    def get_meta(self, key: str) -> Optional[str]:
        row = self.conn.execute("SELECT value FROM metadata WHERE key = ?", (key,)).fetchone()
        return row[0] if row else None

    def set_meta(self, key: str, value: str) -> None:
        self.conn.execute(
            "INSERT INTO metadata(key, value) VALUES (?, ?) "
            "ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            (key, value),
        )

    def event_count(self, modality: Optional[str] = None) -> int:
        if modality is None:
            return self.conn.execute("SELECT COUNT(*) FROM messages").fetchone()[0]
        return self.conn.execute("SELECT COUNT(*) FROM messages WHERE modality = ?", (modality,)).fetchone()[0]

    def distinct_senders(self) -> int:
        return self.conn.execute(
            "SELECT COUNT(DISTINCT sender) FROM messages WHERE modality = 'message' AND sender != ''"
        ).fetchone()[0]


def open_store(path: str | Path, embedder: dense.Embedder | str | None = None) -> Store:
    """Open (or create) the store file at ``path``.

    ``embedder`` may be an embedder object, a registered name, or ``None`` to
    reuse whatever the file was created with (default embedder for new files).
    """
    path = Path(path)
    if isinstance(embedder, str):
        embedder = dense.get_embedder(embedder)
    try:
        conn = sqlite3.connect(str(path), isolation_level=None, check_same_thread=False)
        conn.execute("PRAGMA journal_mode=DELETE")
        existing = conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' AND name='metadata'"
        ).fetchone()
    except sqlite3.DatabaseError as exc:
        raise CorruptStoreError(f"{path}: not a readable store ({exc})") from exc

    if existing is None:
        embedder = embedder or dense.get_embedder(dense.DEFAULT_EMBEDDER)
        # schema and identity rows commit together; the script leaves the transaction open
        conn.executescript("BEGIN IMMEDIATE;\n" + _SCHEMA_SQL)
        conn.execute("INSERT INTO metadata(key, value) VALUES ('schema_version', ?)", (str(SCHEMA_VERSION),))
        conn.execute("INSERT INTO metadata(key, value) VALUES ('embedder', ?)", (embedder.name,))
        conn.execute("INSERT INTO metadata(key, value) VALUES ('embedder_dim', ?)", (str(embedder.dimension),))
        conn.execute("COMMIT")
        return Store(path, conn, embedder, SCHEMA_VERSION)

    meta = dict(conn.execute("SELECT key, value FROM metadata").fetchall())
    try:
        version = int(meta["schema_version"])
        stored_name = meta["embedder"]
    except (KeyError, ValueError) as exc:
        conn.close()
        raise CorruptStoreError(f"{path}: metadata table is incomplete") from exc
    if version > SCHEMA_VERSION:
        conn.close()
        raise SchemaVersionError(f"{path}: schema version {version} is newer than supported {SCHEMA_VERSION}")
    if embedder is None:
        try:
            embedder = dense.get_embedder(stored_name)
        except KeyError as exc:
            conn.close()
            raise EmbedderMismatchError(
                f"{path}: written with external embedder {stored_name!r}; pass it explicitly"
            ) from exc
    elif embedder.name != stored_name:
        conn.close()
        raise EmbedderMismatchError(f"{path}: written with embedder {stored_name!r}, configured {embedder.name!r}")
    return Store(path, conn, embedder, version)


def _row_to_event(row: tuple) -> Event:
    tags = GateSignals.from_dict(json.loads(row[7])) if row[7] else None
    return Event(
        id=row[0], text=row[1], sender=row[2], recipient=row[3], timestamp=row[4],
        category=row[5], modality=row[6], signal_tags=tags,
    )


def _validate(event_input: EventInput) -> None:
    if not event_input.text:
        raise EmptyTextError("event text must be non-empty")
    if event_input.timestamp is not None and event_input.timestamp < 0:
        raise ValueError("timestamp must be non-negative")
    if event_input.category is not None and event_input.category not in CATEGORIES:
        raise ValueError(f"unknown category {event_input.category!r}")
    if event_input.modality not in MODALITIES:
        raise ValueError(f"unknown modality {event_input.modality!r}")


def _insert(store: Store, event_input: EventInput, signal_tags: Optional[GateSignals], category: Optional[str]) -> Event:
    ts = event_input.timestamp if event_input.timestamp is not None else int(time.time())
    category = category or event_input.category or "statement"
    tags_json = json.dumps(signal_tags.to_dict(), sort_keys=True) if signal_tags else None
    cur = store.conn.execute(
        "INSERT INTO messages(text, sender, recipient, timestamp, category, modality, signal_tags) "
        "VALUES (?, ?, ?, ?, ?, ?, ?)",
        (event_input.text, event_input.sender, event_input.recipient, ts, category, event_input.modality, tags_json),
    )
    event = Event(
        id=cur.lastrowid, text=event_input.text, sender=event_input.sender,
        recipient=event_input.recipient, timestamp=ts, category=category,
        modality=event_input.modality, signal_tags=signal_tags,
    )
    hook = store._fault_hook
    if hook:
        hook("row")
    lexical.index_text(store, event)
    if hook:
        hook("lexical")
    dense.index_vector(store, event)
    if hook:
        hook("dense")
    return event


def append_event(
    store: Store,
    event_input: EventInput,
    *,
    signal_tags: Optional[GateSignals] = None,
    category: Optional[str] = None,
) -> Event:
    """Persist one event and update both indices in a single transaction.

    ``category`` overrides the caller-supplied one (the gate's classifier wins).
    """
    _validate(event_input)
    store._dense_cache = None
    with store.transaction():
        return _insert(store, event_input, signal_tags, category)


def append_events(store: Store, inputs: Iterable[EventInput]) -> list[Event]:
    """Bulk append in one transaction; all events land or none do."""
    inputs = list(inputs)
    for item in inputs:
        _validate(item)
    store._dense_cache = None
    with store.transaction():
        return [_insert(store, item, None, None) for item in inputs]


def get_event(store: Store, event_id: int) -> Event:
    row = store.conn.execute(f"SELECT {_EVENT_COLUMNS} FROM messages WHERE id = ?", (event_id,)).fetchone()
    if row is None:
        raise UnknownEventError(event_id)
    return _row_to_event(row)


def get_events(store: Store, event_ids: Iterable[int]) -> dict[int, Event]:
    ids = list(dict.fromkeys(event_ids))
    out: dict[int, Event] = {}
    for start in range(0, len(ids), 500):
        chunk = ids[start:start + 500]
        marks = ",".join("?" * len(chunk))
        for row in store.conn.execute(f"SELECT {_EVENT_COLUMNS} FROM messages WHERE id IN ({marks})", chunk):
            out[row[0]] = _row_to_event(row)
    return out


def list_events(
    store: Store,
    from_ts: Optional[int] = None,
    to_ts: Optional[int] = None,
    *,
    modality: Optional[str] = None,
) -> list[Event]:
    """Events with ``from_ts <= timestamp <= to_ts`` ordered by (timestamp, id)."""
    clauses, params = [], []
    if from_ts is not None:
        clauses.append("timestamp >= ?")
        params.append(from_ts)
    if to_ts is not None:
        clauses.append("timestamp <= ?")
        params.append(to_ts)
    if modality is not None:
        clauses.append("modality = ?")
        params.append(modality)
    where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
    rows = store.conn.execute(f"SELECT {_EVENT_COLUMNS} FROM messages {where} ORDER BY timestamp, id", params)
    return [_row_to_event(r) for r in rows]


def segment_episodes(events: list[Event], gap: int = EPISODE_GAP_SECONDS) -> list[list[Event]]:
    """Split time-ordered events wherever consecutive timestamps differ by >= ``gap``."""
    groups: list[list[Event]] = []
    for ev in events:
        if groups and ev.timestamp - groups[-1][-1].timestamp < gap:
            groups[-1].append(ev)
        else:
            groups.append([ev])
    return groups


def rebuild_episodes(store: Store) -> list[Episode]:
    """Recompute session boundaries over conversational messages and persist them."""
    groups = segment_episodes(list_events(store, modality="message"))
    episodes = [
        Episode(id=i, start_ts=g[0].timestamp, end_ts=g[-1].timestamp, event_ids=[e.id for e in g])
        for i, g in enumerate(groups, start=1)
    ]
    with store.transaction() as conn:
        conn.execute("DELETE FROM episodes")
        conn.executemany(
            "INSERT INTO episodes(id, start_ts, end_ts, event_ids) VALUES (?, ?, ?, ?)",
            [(ep.id, ep.start_ts, ep.end_ts, json.dumps(ep.event_ids)) for ep in episodes],
        )
    return episodes


def load_episodes(store: Store) -> list[Episode]:
    rows = store.conn.execute("SELECT id, start_ts, end_ts, event_ids FROM episodes ORDER BY id")
    return [Episode(r[0], r[1], r[2], json.loads(r[3])) for r in rows]


def stats(store: Store) -> dict[str, Any]:
    conn = store.conn
    n_messages = store.event_count("message")
    n_scored = conn.execute(
        "SELECT COUNT(*) FROM surprise_scores s JOIN messages m ON m.id = s.event_id WHERE m.modality = 'message'"
    ).fetchone()[0]
    n_episodes = len(segment_episodes(list_events(store, modality="message")))
    return {
        "events": store.event_count(),
        "messages": n_messages,
        "episodes": n_episodes,
        "entities": conn.execute("SELECT COUNT(*) FROM entity_style_vectors").fetchone()[0],
        "summaries": conn.execute("SELECT COUNT(*) FROM summaries").fetchone()[0],
        "contradictions": conn.execute("SELECT COUNT(*) FROM contradictions").fetchone()[0],
        "timeline_assertions": conn.execute("SELECT COUNT(*) FROM timeline").fetchone()[0],
        "surprise_coverage": (n_scored / n_messages) if n_messages else 0.0,
        "embedder": store.embedder_identity,
        "schema_version": store.schema_version,
    }


__all__ = [
    "EPISODE_GAP_SECONDS",
    "SCHEMA_VERSION",
    "MemoryStoreError",
    "Store",
    "append_event",
    "append_events",
    "get_event",
    "get_events",
    "list_events",
    "load_episodes",
    "open_store",
    "rebuild_episodes",
    "segment_episodes",
    "stats",
]
