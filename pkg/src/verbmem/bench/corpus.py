"""Seeded synthetic conversations with planted needle facts.

Several speakers chat over sessions separated by multi-hour gaps. Each needle
fact is paired with a question; its relevant events are the needle plus any
later update that contradicts it. Some filler lines mention a needle's topic
word in passing, so the topic word alone does not identify the needle.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

BASE_TS = 1_700_000_000
HOUR = 3600
SESSION_GAP = (7 * HOUR, 3 * 24 * HOUR)   # always above the 6 h episode gap
MESSAGE_GAP = (20, 900)
SESSION_SIZE = (6, 18)
NOISE_RATE = 0.15
UPDATE_RATE = 0.25
DISTRACTOR_RATE = 0.12

SPEAKERS = ("Alice", "Bob", "Carmen", "Dmitri", "Esther", "Farid")
TOPICS = (
    "locker", "passport", "bicycle", "telescope", "aquarium", "violin", "greenhouse", "kayak",
    "sculpture", "podcast", "lantern", "hammock", "vineyard", "chessboard", "drone", "terrarium",
    "accordion", "canoe", "quilt", "microscope", "scooter", "sailboat", "trophy", "harmonica",
    "fireplace", "bonsai", "typewriter", "skateboard", "compass", "hourglass", "easel", "banjo",
    "tandem", "igloo", "marimba", "periscope", "snowmobile", "xylophone", "zeppelin", "yurt",
)
# (statement, update, question)
NEEDLES = (
    ("By the way, my {topic} is called {value}.",
     "Actually, I renamed my {topic}, it is called {value} now.",
     "What is {name}'s {topic} called?"),
    ("Remember that the code for my {topic} is {value}.",
     "Update: the code for my {topic} changed to {value}.",
     "What is the code for {name}'s {topic}?"),
    ("I keep my {topic} at the {value} depot these days.",
     "I moved my {topic} to the {value} depot instead.",
     "Where does {name} keep the {topic}?"),
)
NOISE = ("ok", "lol", "thanks!", "haha", "sure", "k", "yep", "cool", "nice", "hmm")
FILLER = (
    "Did you catch the {thing} at the {place} last night?",
    "I think the {place} is getting busier every week.",
    "We should grab {food} near the {place} sometime.",
    "My {relative} keeps asking about the {thing}.",
    "Honestly the {thing} was better than I expected.",
    "Traffic near the {place} was terrible this morning.",
    "Let me know if you want to split the {food} order.",
    "I saw a great documentary about the {thing} yesterday.",
    "The weather here has been {weather} all day.",
    "Do you still have that book about the {thing}?",
)
DISTRACTORS = (
    "Someone at the {place} was showing off a {topic} today.",
    "I read an article about how to pick a good {topic}.",
    "Is a {topic} expensive to maintain?",
)
THINGS = ("game", "concert", "movie", "exhibit", "parade", "match", "show", "lecture", "festival", "premiere")
PLACES = ("station", "market", "library", "harbor", "stadium", "mall", "park", "museum", "plaza", "bakery")
FOODS = ("pizza", "noodles", "tacos", "curry", "sushi", "dumplings", "salad", "burgers")
RELATIVES = ("sister", "brother", "cousin", "uncle", "aunt", "grandmother", "neighbor")
WEATHER = ("grey", "sunny", "windy", "rainy", "humid", "chilly")

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SyntheticCorpus:
    seed: int
    events: list[dict[str, Any]]
    queries: list[tuple[str, list[int]]]          # relevant ids are 1-based stream positions
    n_sessions: int = 0
    needles: list[dict[str, Any]] = field(default_factory=list)

    def validate(self) -> None:
        n = len(self.events)
        for text, relevant in self.queries:
            if not relevant or any(not 1 <= r <= n for r in relevant):
                raise ValueError(f"query {text!r} has invalid relevant ids {relevant}")


def _value(rng: random.Random, used: set[str], kind: int) -> str:
    while True:
        if kind == 1:
            value = str(rng.randint(1000, 9999))
        else:
            value = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3)).capitalize()
        if value not in used:
            used.add(value)
            return value


def _filler(rng: random.Random) -> str:
    return rng.choice(FILLER).format(
        thing=rng.choice(THINGS), place=rng.choice(PLACES), food=rng.choice(FOODS),
        relative=rng.choice(RELATIVES), weather=rng.choice(WEATHER),
    )


def generate_corpus(seed: int, n_events: int = 200, n_queries: int = 20, n_speakers: int = 4) -> SyntheticCorpus:
    """Deterministic corpus of exactly ``n_events`` events and ``n_queries`` needle questions."""
    if n_events < 1:
        raise ValueError("n_events must be at least 1")
    if not 0 <= n_queries <= len(TOPICS):
        raise ValueError(f"n_queries must be between 0 and {len(TOPICS)}")
    if not 2 <= n_speakers <= len(SPEAKERS):
        raise ValueError(f"n_speakers must be between 2 and {len(SPEAKERS)}")
    rng = random.Random(seed)
    speakers = list(SPEAKERS[:n_speakers])
    topics = rng.sample(TOPICS, n_queries)

    # plan needle and update slots first so the counts are exact
    updates = [q for q in range(n_queries) if rng.random() < UPDATE_RATE]
    needed = n_queries + len(updates)
    if needed > n_events:
        raise ValueError(f"{n_events} events cannot hold {needed} needle and update messages")
    sequence: list[tuple[str, int]] = [("needle", q) for q in range(n_queries)]
    rng.shuffle(sequence)
    for q in updates:
        after = sequence.index(("needle", q))
        sequence.insert(rng.randint(after + 1, len(sequence)), ("update", q))
    slot_kinds = dict(zip(sorted(rng.sample(range(n_events), needed)), sequence))

    templates = [rng.randrange(len(NEEDLES)) for _ in range(n_queries)]
    owners = [rng.choice(speakers) for _ in range(n_queries)]
    used: set[str] = set()
    needles = [{"topic": topics[q], "sender": owners[q], "template": templates[q], "ids": []} for q in range(n_queries)]

    events: list[dict[str, Any]] = []
    ts = BASE_TS
    n_sessions = 0
    remaining_in_session = 0
    for pos in range(n_events):
        if remaining_in_session == 0:
            if pos:
                ts += rng.randint(*SESSION_GAP)
            n_sessions += 1
            remaining_in_session = rng.randint(*SESSION_SIZE)
            pair = rng.sample(speakers, 2)
        else:
            ts += rng.randint(*MESSAGE_GAP)
        remaining_in_session -= 1
        kind = slot_kinds.get(pos)
        if kind is not None:
            q = kind[1]
            sender = owners[q]
            template = NEEDLES[templates[q]][0 if kind[0] == "needle" else 1]
            text = template.format(topic=topics[q], value=_value(rng, used, templates[q]))
            needles[q]["ids"].append(pos + 1)
        else:
            sender = rng.choice(pair)
            roll = rng.random()
            if roll < NOISE_RATE:
                text = rng.choice(NOISE)
            elif roll < NOISE_RATE + DISTRACTOR_RATE and topics:
                text = rng.choice(DISTRACTORS).format(topic=rng.choice(topics), place=rng.choice(PLACES))
            else:
                text = _filler(rng)
        recipient = next(s for s in pair if s != sender) if sender in pair else pair[0]
        events.append({"text": text, "sender": sender, "recipient": recipient, "timestamp": ts})

    queries = [
        (NEEDLES[n["template"]][2].format(name=n["sender"], topic=n["topic"]), list(n["ids"]))
        for n in needles
    ]
    corpus = SyntheticCorpus(seed, events, queries, n_sessions, needles)
    corpus.validate()
    return corpus


def save_corpus(corpus: SyntheticCorpus, directory: str | Path) -> tuple[Path, Path]:
    """Write ``events.jsonl`` (ingest schema) and ``queries.jsonl``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    events_path = directory / "events.jsonl"
    queries_path = directory / "queries.jsonl"
    with open(events_path, "w", encoding="utf-8") as fh:
        for ev in corpus.events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    with open(queries_path, "w", encoding="utf-8") as fh:
        meta = {"seed": corpus.seed, "n_sessions": corpus.n_sessions}
        for text, relevant in corpus.queries:
            fh.write(json.dumps({"query": text, "relevant": relevant, **meta}, sort_keys=True) + "\n")
    return events_path, queries_path


def load_corpus(directory: str | Path) -> SyntheticCorpus:
    """Read a corpus directory; works for any JSONL corpus in the same schema."""
    directory = Path(directory)
    with open(directory / "events.jsonl", encoding="utf-8") as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    queries = []
    seed, n_sessions = 0, 0
    with open(directory / "queries.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            queries.append((row["query"], [int(r) for r in row["relevant"]]))
            seed = row.get("seed", seed)
            n_sessions = row.get("n_sessions", n_sessions)
    corpus = SyntheticCorpus(seed, events, queries, n_sessions)
    corpus.validate()
    return corpus
