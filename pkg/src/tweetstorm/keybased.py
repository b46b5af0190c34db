"""Burst detection on "uncommonly common" words.

Count tasks (fields-grouped by term) count words per document and announce a
term once it becomes common. A single detector task computes tf-idf for the
common terms of the document just finished and for the same terms in the
previous document; a term whose ratio reaches ``tfidf_event_rate`` is an
event.
"""
from __future__ import annotations

import csv
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import runtime as rt
from .ingest import DEFAULT_WINDOW_SECONDS, EndOfDocument, RawTweet, replay
from .preprocess import Preprocessor

HISTORY_LENGTH = 10


@dataclass
class KeyParams:
    tfidf_event_rate: float = 2.0
    common_word_threshold: int = 10
    absolute_floor: float = 1e-4

    def __post_init__(self):
        if self.tfidf_event_rate <= 1:
            raise ValueError("tfidf_event_rate must be > 1")
        if self.common_word_threshold < 1:
            raise ValueError("common_word_threshold must be a positive integer")


@dataclass
class TermStats:
    term: str
    count_current: int = 0
    doc_frequency: int = 0
    prev_count: int = 0
    doc: int = -1
    tfidf_history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LENGTH))

    def record(self, doc: int, value: float) -> None:
        if not self.tfidf_history or self.tfidf_history[-1][0] < doc:
            self.tfidf_history.append((doc, value))


@dataclass(frozen=True)
class WordEvent:
    term: str
    doc: int
    increment_rate: float
    history: tuple = ()

    def to_record(self) -> dict:
        rate = "inf" if math.isinf(self.increment_rate) else self.increment_rate
        return {
            "type": "word_event",
            "term": self.term,
            "doc": self.doc,
            "increment_rate": rate,
            "history": [[d, v] for d, v in self.history],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "WordEvent":
        rate = rec["increment_rate"]
        rate = math.inf if rate == "inf" else float(rate)
        return cls(rec["term"], int(rec["doc"]), rate, tuple((int(d), float(v)) for d, v in rec["history"]))


@dataclass(frozen=True, slots=True)
class DocumentCounts:
    """End-of-document summary from one count task."""

    task: int
    doc: int
    total_tokens: int
    candidates: dict  # term -> (count, prev_count, doc_frequency)


def count_and_forward(term: str, doc: int, params: KeyParams, state: TermStats) -> Optional[str]:
    """Count one occurrence; returns ``term`` exactly when it turns common."""
    if state.doc != doc:
        state.prev_count = state.count_current if state.doc == doc - 1 else 0
        state.doc = doc
        state.count_current = 0
        state.doc_frequency += 1
    state.count_current += 1
    if state.count_current == params.common_word_threshold:
        return term
    return None


def tf(term_count: int, doc_total_terms: int) -> float:
    if doc_total_terms <= 0:
        raise ValueError("term frequency is undefined for an empty document")
    return term_count / doc_total_terms


def idf(docs_processed: int, doc_frequency: int) -> float:
    return math.log(docs_processed / (1 + doc_frequency))


def tfidf(term_count: int, doc_total_terms: int, docs_processed: int, doc_frequency: int) -> float:
    return tf(term_count, doc_total_terms) * idf(docs_processed, doc_frequency)


def increment_rate(current: float, previous: float) -> float:
    if current <= 0:
        return 0.0
    if previous <= 0:
        return math.inf
    return current / previous


def detect_events(doc: int, params: KeyParams, stats: Iterable[TermStats], doc_total: int,
                  prev_total: int, docs_processed: int) -> list[WordEvent]:
    """Evaluate the common terms of ``doc`` once it has been fully counted.

    ``stats`` carry final counts for ``doc``; ``docs_processed`` counts
    documents ``0..doc``. The previous value uses the same formula one
    document earlier, where the term's document frequency was one lower.
    """
    events = []
    for s in sorted(stats, key=lambda s: s.term):
        current = tfidf(s.count_current, doc_total, docs_processed, s.doc_frequency)
        previous = 0.0
        if s.prev_count > 0 and prev_total > 0 and doc > 0:
            previous = tfidf(s.prev_count, prev_total, docs_processed - 1, s.doc_frequency - 1)
            s.record(doc - 1, previous)
        s.record(doc, current)
        rate = increment_rate(current, previous)
        if rate >= params.tfidf_event_rate and current > params.absolute_floor:
            events.append(WordEvent(s.term, doc, rate, tuple(s.tfidf_history)))
    return events


# -- bolts ------------------------------------------------------------------


class CountBolt(rt.Bolt):
    def __init__(self, params: KeyParams):
        self.params = params
        self.terms: dict[str, TermStats] = {}
        self.total = 0
        self.common: list[str] = []

    def process(self, tup, collector):
        word = tup.payload
        state = self.terms.get(word.term)
        if state is None:
            state = self.terms[word.term] = TermStats(word.term)
        self.total += 1
        if count_and_forward(word.term, word.doc, self.params, state) is not None:
            self.common.append(word.term)
            collector.emit(rt.Candidate(word.term, word.doc,
                                        (state.count_current, state.prev_count, state.doc_frequency)))

    def end_document(self, doc, collector):
        final = {}
        for term in self.common:
            s = self.terms[term]
            final[term] = (s.count_current, s.prev_count, s.doc_frequency)
        collector.emit(DocumentCounts(self.context.task, doc, self.total, final), doc)
        self.total = 0
        self.common = []


class EventDetectorBolt(rt.Bolt):
    """Holds all detector-side TermStats; the only producer of word events.

    With the direct barrier, terms are evaluated at the end of the document
    on final counts. In sleep mode the bolt cannot tell when a document ends,
    so it evaluates each candidate on arrival using the count at emission and
    the most recent complete document total as the denominator.
    """

    def __init__(self, params: KeyParams, totals_log: Optional[dict] = None):
        self.params = params
        self.stats: dict[str, TermStats] = {}
        self.totals: dict[int, int] = {}
        self.partial: dict[int, int] = {}
        self.finals: dict[str, tuple] = {}
        self.documents = 0
        self.totals_log = totals_log
        self.flagged: set = set()

    def _stats(self, term):
        s = self.stats.get(term)
        if s is None:
            s = self.stats[term] = TermStats(term)
        return s

    def process(self, tup, collector):
        payload = tup.payload
        if type(payload) is DocumentCounts:
            self.partial[payload.doc] = self.partial.get(payload.doc, 0) + payload.total_tokens
            self.finals.update(payload.candidates)
            if self.totals_log is not None:
                self.totals_log.setdefault(payload.doc, {})[payload.task] = payload.total_tokens
        elif not self.context.mode.is_direct:
            self._evaluate_now(payload, collector)

    def _evaluate_now(self, cand: rt.Candidate, collector):
        count, prev_count, df = cand.stats
        doc = cand.doc
        if (cand.term, doc) in self.flagged:
            return
        latest = max(self.totals) if self.totals else None
        total = self.totals[latest] if latest is not None else count
        prev_total = self.totals.get(doc - 1, total)
        s = self._stats(cand.term)
        s.count_current, s.prev_count, s.doc_frequency, s.doc = count, prev_count, df, doc
        events = detect_events(doc, self.params, [s], max(total, count), prev_total,
                               max(self.documents, doc) + 1)
        for e in events:
            self.flagged.add((e.term, e.doc))
            collector.emit(e, doc)

    def end_document(self, doc, collector):
        self.documents += 1
        total = self.partial.pop(doc, 0)
        self.totals[doc] = total
        self.totals.pop(doc - 2, None)
        finals, self.finals = self.finals, {}
        if not self.context.mode.is_direct:
            return
        batch = []
        for term, (count, prev_count, df) in finals.items():
            s = self._stats(term)
            s.count_current, s.prev_count, s.doc_frequency, s.doc = count, prev_count, df, doc
            batch.append(s)
        for e in detect_events(doc, self.params, batch, total, self.totals.get(doc - 1, 0), self.documents):
            collector.emit(e, doc)


class EventCompareBolt(rt.Bolt):
    """Persists each document's events and their histories in one commit."""

    def __init__(self, store, sink: list):
        self.store = store
        self.sink = sink
        self.buffer: list[WordEvent] = []

    def process(self, tup, collector):
        self.buffer.append(tup.payload)

    def end_document(self, doc, collector):
        events, self.buffer = self.buffer, []
        events.sort(key=lambda e: (e.doc, e.term))
        histories = {e.term: list(e.history) for e in events}
        self.store.commit_document(doc, events=[e.to_record() for e in events], histories=histories)
        self.sink.extend(events)


# -- pipeline ---------------------------------------------------------------


class _WordSpout:
    def __init__(self, tweets, preprocessor, window_seconds, stream_start):
        self.tweets = tweets
        self.preprocessor = preprocessor
        self.window_seconds = window_seconds
        self.stream_start = stream_start

    def __iter__(self):
        pre = self.preprocessor
        Word = rt.Word
        for item in replay(self.tweets, self.window_seconds, self.stream_start):
            if type(item) is EndOfDocument:
                yield item
                continue
            tweet, doc = item
            for term in pre(tweet.text):
                yield Word(term, doc), doc


def _term_key(payload):
    return payload.term


def build_topology(tweets: Iterable[RawTweet], store, params: KeyParams, sink: list, *,
                   tasks: int = 4, preprocessor: Optional[Preprocessor] = None,
                   window_seconds: int = DEFAULT_WINDOW_SECONDS, stream_start: Optional[int] = None,
                   totals_log: Optional[dict] = None) -> rt.Topology:
    spout = _WordSpout(tweets, preprocessor or Preprocessor(), window_seconds, stream_start)
    topo = rt.Topology(spout)
    topo.add_bolt("count", lambda: CountBolt(params), tasks, {rt.SPOUT: rt.Grouping.fields(_term_key)})
    topo.add_bolt("detector", lambda: EventDetectorBolt(params, totals_log), 1,
                  {"count": rt.Grouping.global_()})
    topo.add_bolt("compare", lambda: EventCompareBolt(store, sink), 1,
                  {"detector": rt.Grouping.global_()})
    return topo


@dataclass
class KeybasedRun:
    events: list
    report: rt.RunReport
    store: object
    totals: dict


def run_keybased(tweets: Iterable[RawTweet], store, params: Optional[KeyParams] = None, *,
                 mode: rt.BarrierMode = rt.BarrierMode.direct(), tasks: int = 4,
                 seed: Optional[int] = 0, queue_bound: int = rt.DEFAULT_QUEUE_BOUND,
                 preprocessor: Optional[Preprocessor] = None,
                 window_seconds: int = DEFAULT_WINDOW_SECONDS,
                 stream_start: Optional[int] = None, trace: bool = False) -> KeybasedRun:
    params = params or KeyParams()
    events: list[WordEvent] = []
    totals: dict = {}
    topo = build_topology(tweets, store, params, events, tasks=tasks, preprocessor=preprocessor,
                          window_seconds=window_seconds, stream_start=stream_start, totals_log=totals)
    report = rt.run(topo, mode, queue_bound=queue_bound, seed=seed, trace=trace)
    return KeybasedRun(events, report, store, totals)


def write_charts(events: Iterable[WordEvent], directory) -> list[str]:
    """One ``<term>-<doc>.csv`` per event with its (doc, tf-idf) history."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for e in events:
        path = os.path.join(directory, f"{e.term.replace(os.sep, '_')}-{e.doc}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["docId", "tfidf"])
            for d, v in e.history[-HISTORY_LENGTH:]:
                w.writerow([d, repr(float(v))])
        paths.append(path)
    return paths
