"""Dense retrieval: pluggable embedders and an exact cosine scan.

The default embedder is signed feature hashing of character 3/4/5-grams into
256 buckets. Each gram is hashed with keyed BLAKE2b (8-byte digest, fixed key
below); the low 8 bits pick the bucket and bit 63 picks the sign. The same
routine (``ngram_vector``) produces speaker style vectors, case-preserving
there and case-folded for retrieval.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Protocol

import numpy as np

from verbmem.text import tokenize

if TYPE_CHECKING:
    from verbmem.models import Event
    from verbmem.substrate import Store

DIM = 256
NGRAM_SIZES = (3, 4, 5)
HASH_KEY = b"verbmem/ngram/v1"
DEFAULT_EMBEDDER = "default-hash-256"
# cosines equal to this many decimals are ranked as ties (ascending event id)
TIE_DECIMALS = 12


class Embedder(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class DenseHit:
    event_id: int
    cosine: float
    rank: int


@lru_cache(maxsize=1 << 18)
def _bucket(feature: str) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=HASH_KEY).digest()
    h = int.from_bytes(digest, "little")
    return h & (DIM - 1), (-1.0 if h >> 63 else 1.0)


def canonical_vector(dim: int = DIM) -> np.ndarray:
    v = np.zeros(dim)
    v[0] = 1.0
    return v


def _hashed(features: list[str]) -> np.ndarray:
    acc = [0.0] * DIM
    for f in features:
        idx, sign = _bucket(f)
        acc[idx] += sign
    v = np.asarray(acc)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return canonical_vector()
    return v / norm


def char_ngrams(text: str, sizes: tuple[int, ...] = NGRAM_SIZES) -> list[str]:
    padded = f" {text} "
    return [padded[i:i + n] for n in sizes for i in range(len(padded) - n + 1)]


def ngram_vector(text: str, *, lowercase: bool = False) -> np.ndarray:
    """Unit-norm hashed char-(3,4,5)-gram vector; empty text maps to ``e_0``."""
    if not text:
        return canonical_vector()
    return _hashed(char_ngrams(text.lower() if lowercase else text))


class HashEmbedder:
    """Default embedder: case-folded hashed char n-grams, 256-d."""

    name = DEFAULT_EMBEDDER
    dimension = DIM

    def embed(self, text: str) -> np.ndarray:
        return ngram_vector(text, lowercase=True)


class WordHashEmbedder:
    """Hashed word unigrams; a weaker baseline used by the bench grid."""

    name = "word-hash-256"
    dimension = DIM

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return canonical_vector()
        return _hashed([f"w:{t}" for t in tokens])


EMBEDDERS: dict[str, Callable[[], Embedder]] = {
    HashEmbedder.name: HashEmbedder,
    WordHashEmbedder.name: WordHashEmbedder,
}


def get_embedder(name: str) -> Embedder:
    try:
        return EMBEDDERS[name]()
    except KeyError:
        raise KeyError(f"unknown embedder {name!r}; registered: {sorted(EMBEDDERS)}") from None


def register_embedder(name: str, factory: Callable[[], Embedder]) -> None:
    EMBEDDERS[name] = factory


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return canonical_vector(len(v))
    return v / norm


def embed_text(store: "Store", text: str) -> np.ndarray:
    return normalize(store.embedder.embed(text))


def encode_vector(v: np.ndarray) -> bytes:
    return np.asarray(v, dtype="<f8").tobytes()


def decode_vector(blob: bytes) -> np.ndarray:
    return np.frombuffer(blob, dtype="<f8").copy()


def index_vector(store: "Store", event: "Event") -> None:
    vec = embed_text(store, event.text)
    store.conn.execute(
        "INSERT INTO vec_messages(event_id, vector) VALUES (?, ?)", (event.id, encode_vector(vec))
    )


def load_matrix(store: "Store") -> tuple[np.ndarray, np.ndarray]:
    """All stored vectors as ``(ids, matrix)``; cached on the handle until the next write."""
    cached = store._dense_cache
    if cached is not None:
        return cached
    rows = store.conn.execute("SELECT event_id, vector FROM vec_messages ORDER BY event_id").fetchall()
    if rows:
        ids = np.fromiter((r[0] for r in rows), dtype=np.int64, count=len(rows))
        matrix = np.vstack([decode_vector(r[1]) for r in rows])
    else:
        ids = np.zeros(0, dtype=np.int64)
        matrix = np.zeros((0, store.embedder.dimension))
    store._dense_cache = (ids, matrix)
    return ids, matrix


def rank_by_cosine(ids: np.ndarray, cosines: np.ndarray, k: int) -> list[DenseHit]:
    keys = np.round(cosines, TIE_DECIMALS)
    order = np.lexsort((ids, -keys))[:k]
    return [DenseHit(int(ids[i]), float(cosines[i]), r) for r, i in enumerate(order, start=1)]


def search_dense(store: "Store", query_text: str, k: int, *, query_vector: np.ndarray | None = None) -> list[DenseHit]:
    """Exact top-``k`` by cosine over every stored vector; ties by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, matrix = load_matrix(store)
    if len(ids) == 0:
        return []
    q = embed_text(store, query_text) if query_vector is None else normalize(query_vector)
    return rank_by_cosine(ids, matrix @ q, k)
