"""Corpus parsing, time-document assignment and ordered replay.

A corpus file holds one JSON record per line::

    {"id": "1", "ts": 1464652800, "text": "hello", "country": "US"}

``id``, ``ts`` and ``text`` are required, ``country`` is optional.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

DEFAULT_WINDOW_SECONDS = 360


class CorpusError(ValueError):
    """Base class for corpus problems."""


class ParseError(CorpusError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(where + message)


class FieldError(CorpusError):
    def __init__(self, field: str, line_no: Optional[int] = None, message: str = "missing field"):
        self.field = field
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message} `{field}`")


class OutOfRangeError(CorpusError):
    pass


class OrderingError(CorpusError):
    pass


@dataclass(frozen=True)
class RawTweet:
    id: str
    timestamp: int
    text: str
    country: Optional[str] = None


@dataclass(frozen=True)
class EndOfDocument:
    """Marker emitted by :func:`replay` after the last tweet of a document."""

    doc: int


ReplayItem = Union[tuple, EndOfDocument]


def parse_corpus_line(line: str, line_no: Optional[int] = None) -> RawTweet:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed record ({exc.msg})", line_no) from None
    if not isinstance(record, dict):
        raise ParseError("record is not an object", line_no)
    for field in ("id", "ts", "text"):
        if field not in record:
            raise FieldError(field, line_no)

    tweet_id, ts, text = record["id"], record["ts"], record["text"]
    if isinstance(tweet_id, int) and not isinstance(tweet_id, bool):
        tweet_id = str(tweet_id)
    if not isinstance(tweet_id, str) or not tweet_id:
        raise FieldError("id", line_no, "empty or non-string")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise FieldError("ts", line_no, "non-integer")
    if not isinstance(text, str):
        raise FieldError("text", line_no, "non-string")
    country = record.get("country")
    if country is not None and not isinstance(country, str):
        raise FieldError("country", line_no, "non-string")
    return RawTweet(tweet_id, ts, text.strip(), country)


def format_corpus_line(tweet: RawTweet) -> str:
    record = {"id": tweet.id, "ts": tweet.timestamp, "text": tweet.text}
    if tweet.country is not None:
        record["country"] = tweet.country
    return json.dumps(record, ensure_ascii=False)


def iter_corpus(path, country: Optional[str] = None) -> Iterator[RawTweet]:
    """Yield tweets from a corpus file, skipping blank lines.

    Duplicate ids raise :class:`FieldError`.
    """
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tweet = parse_corpus_line(line, line_no)
            if tweet.id in seen:
                raise FieldError("id", line_no, "duplicate")
            seen.add(tweet.id)
            if country is not None and tweet.country != country:
                continue
            yield tweet


def read_corpus(path, country: Optional[str] = None) -> list[RawTweet]:
    return list(iter_corpus(path, country))


def write_corpus(path, tweets: Iterable[RawTweet]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tweet in tweets:
            fh.write(format_corpus_line(tweet) + "\n")


def corpus_fingerprint(tweets: Iterable[RawTweet]) -> str:
    """Content hash of a tweet sequence, independent of file formatting."""
    h = hashlib.sha256()
    for t in tweets:
        h.update(format_corpus_line(t).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def default_stream_start(first_timestamp: int, window_seconds: int = DEFAULT_WINDOW_SECONDS) -> int:
    return first_timestamp - first_timestamp % window_seconds


def assign_document(tweet: RawTweet, stream_start: int, window_seconds: int = DEFAULT_WINDOW_SECONDS) -> int:
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    if tweet.timestamp < stream_start:
        raise OutOfRangeError(
            f"tweet {tweet.id} at {tweet.timestamp} precedes stream start {stream_start}"
        )
    return (tweet.timestamp - stream_start) // window_seconds


def replay(
    corpus: Iterable[RawTweet],
    window_seconds: int = DEFAULT_WINDOW_SECONDS,
    stream_start: Optional[int] = None,
) -> Iterator[ReplayItem]:
    """Replay tweets in time order as ``(tweet, doc)`` pairs.

    An :class:`EndOfDocument` marker follows every document, including empty
    ones between two non-empty documents, so ``n`` markers are emitted for a
    corpus whose last tweet falls in document ``n - 1``.
    Raises :class:`OrderingError` as soon as a timestamp goes backwards.
    """
    it = iter(corpus)
    try:
        first = next(it)
    except StopIteration:
        return
    if stream_start is None:
        stream_start = default_stream_start(first.timestamp, window_seconds)

    current = 0
    last_ts = first.timestamp
    tweet = first
    while True:
        if tweet.timestamp < last_ts:
            raise OrderingError(
                f"tweet {tweet.id} at {tweet.timestamp} is earlier than previous tweet at {last_ts}"
            )
        last_ts = tweet.timestamp
        doc = assign_document(tweet, stream_start, window_seconds)
        while current < doc:
            yield EndOfDocument(current)
            current += 1
        yield tweet, doc
        try:
            tweet = next(it)
        except StopIteration:
            break
    yield EndOfDocument(current)
