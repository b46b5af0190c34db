"""Deterministic synthetic tweet corpora with planted bursts and topics.

The generator writes a corpus file plus a ground-truth sidecar listing what
was planted, so detectors can be checked against known answers.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Optional

from .ingest import DEFAULT_WINDOW_SECONDS, RawTweet, write_corpus
from .preprocess import Preprocessor

DEFAULT_START = 1464652800  # 2016-05-31T00:00:00Z

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class Burst:
    """``count`` extra tweets containing ``term`` in document ``doc``."""

    term: str
    doc: int
    count: int


@dataclass
class Topic:
    """Near-duplicate tweets: all of ``terms`` plus a few background words.

    ``schedule`` maps document -> number of topic tweets.
    """

    terms: list
    schedule: dict
    noise_words: int = 2


@dataclass
class SyntheticSpec:
    documents: int = 10
    tweets_per_doc: int = 100
    words_per_tweet: int = 6
    vocabulary_size: int = 200
    background: str = "zipf"  # zipf | uniform | constant
    zipf_exponent: float = 1.0
    bursts: list = field(default_factory=list)
    topics: list = field(default_factory=list)
    quiet_docs: list = field(default_factory=list)
    noise: float = 0.0
    check_ins: int = 0
    window_seconds: int = DEFAULT_WINDOW_SECONDS
    start: int = DEFAULT_START
    country: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        data["bursts"] = [b if isinstance(b, Burst) else Burst(**b) for b in data.get("bursts", [])]
        topics = []
        for t in data.get("topics", []):
            if not isinstance(t, Topic):
                t = Topic(list(t["terms"]), {int(k): int(v) for k, v in t["schedule"].items()},
                          t.get("noise_words", 2))
            topics.append(t)
        data["topics"] = topics
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticCorpus:
    tweets: list
    truth: list
    vocabulary: list


def pseudo_words(rng: random.Random, n: int, preprocessor: Preprocessor, exclude=frozenset()) -> list:
    """``n`` pronounceable words, each mapping to one distinct token."""
    words, tokens = [], set(exclude)
    attempts = 0
    while len(words) < n:
        attempts += 1
        if attempts > 200 * n + 1000:
            raise ValueError(f"could not generate {n} distinct words")
        syllables = rng.randint(2, 3)
        w = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables))
        w += rng.choice(_CONSONANTS)
        toks = preprocessor(w)
        if len(toks) != 1 or toks[0] in tokens:
            continue
        tokens.add(toks[0])
        words.append(w)
    return words


def _decorate(words: list, rng: random.Random) -> list:
    words = list(words)
    i = rng.randrange(len(words))
    choice = rng.randrange(3)
    if choice == 0:
        words[i] = words[i].capitalize()
    elif choice == 1:
        w = words[i]
        spots = [j for j, ch in enumerate(w)
                 if ch in _VOWELS and (j == 0 or w[j - 1] != ch) and (j + 1 == len(w) or w[j + 1] != ch)]
        if spots:
            j = rng.choice(spots)
            words[i] = w[:j] + w[j] * rng.randint(3, 6) + w[j + 1:]
    else:
        words.append(f"http://t.co/{rng.randrange(16 ** 6):06x}")
    return words


def gen_synthetic(spec: SyntheticSpec, seed: int, path=None, truth_path=None,
                  preprocessor: Optional[Preprocessor] = None) -> SyntheticCorpus:
    """Generate a corpus; identical ``(spec, seed)`` give identical output."""
    pre = preprocessor or Preprocessor()
    rng = random.Random(seed)
    planted = {t for b in spec.bursts for t in pre(b.term)}
    planted |= {t for topic in spec.topics for term in topic.terms for t in pre(term)}
    vocab = pseudo_words(rng, spec.vocabulary_size, pre, exclude=planted)
    zipf = [1.0 / (r + 1) ** spec.zipf_exponent for r in range(len(vocab))]
    quiet = set(spec.quiet_docs)
    slots = spec.tweets_per_doc * spec.words_per_tweet

    tweets: list[RawTweet] = []
    for doc in range(spec.documents):
        texts: list[list] = []
        if doc not in quiet:
            if spec.background == "constant":
                pool = [vocab[j % len(vocab)] for j in range(slots)]
                rng.shuffle(pool)
            elif spec.background == "uniform":
                pool = [rng.choice(vocab) for _ in range(slots)]
            elif spec.background == "zipf":
                pool = rng.choices(vocab, weights=zipf, k=slots)
            else:
                raise ValueError(f"unknown background {spec.background!r}")
            wpt = spec.words_per_tweet
            texts.extend(pool[i:i + wpt] for i in range(0, slots, wpt))
        for burst in spec.bursts:
            if burst.doc == doc:
                texts.extend([burst.term] for _ in range(burst.count))
        for topic in spec.topics:
            for _ in range(topic.schedule.get(doc, 0)):
                words = list(topic.terms) + [rng.choice(vocab) for _ in range(topic.noise_words)]
                rng.shuffle(words)
                texts.append(words)
        if spec.noise > 0:
            texts = [_decorate(t, rng) if t and rng.random() < spec.noise else t for t in texts]
        for _ in range(spec.check_ins if doc not in quiet else 0):
            texts.append(["I", "am", "at", rng.choice(vocab).capitalize()])

        base = spec.start + doc * spec.window_seconds
        offsets = sorted(rng.randrange(spec.window_seconds) for _ in texts)
        rng.shuffle(texts)
        for i, (offset, words) in enumerate(zip(offsets, texts)):
            tweets.append(RawTweet(f"{doc:05d}-{i:05d}", base + offset, " ".join(words), spec.country))

    truth = []
    for b in spec.bursts:
        if b.count > 0:
            truth.append({"kind": "burst", "term": b.term, "tokens": pre(b.term), "doc": b.doc, "count": b.count})
    for topic in spec.topics:
        tokens = [t for term in topic.terms for t in pre(term)]
        for doc in sorted(topic.schedule):
            if topic.schedule[doc] > 0:
                truth.append({"kind": "topic", "terms": list(topic.terms), "tokens": tokens,
                              "doc": doc, "count": topic.schedule[doc]})

    if path is not None:
        write_corpus(path, tweets)
    if truth_path is not None:
        with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in truth:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return SyntheticCorpus(tweets, truth, vocab)
