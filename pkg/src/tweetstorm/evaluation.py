"""Experiment driver: timed runs, run reports and keyword/cluster overlap."""
from __future__ import annotations

import enum
import json
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import runtime as rt
from .clustering import ClusterEvent, ClusterParams, run_clustering
from .ingest import DEFAULT_WINDOW_SECONDS, RawTweet, corpus_fingerprint
from .keybased import KeyParams, WordEvent, run_keybased, write_charts
from .preprocess import Preprocessor
from .store import MemoryStore, dump_snapshot


class Method(str, enum.Enum):
    KEYBASED_SLEEP = "KeybasedSleep"
    KEYBASED_DIRECT = "KeybasedDirect"
    CLUSTERING = "Clustering"


class CorpusMismatchError(ValueError):
    pass


@dataclass
class RunReport:
    method: Method
    wall_time: float
    documents: int
    event_count: int
    store_commits: int
    fingerprint: str = ""
    skipped_tweets: int = 0
    runtime: dict = field(default_factory=dict)

    def __post_init__(self):
        self.method = Method(self.method)
        if self.store_commits > self.documents:
            raise ValueError("store_commits cannot exceed documents")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "wall_time": self.wall_time,
            "documents": self.documents,
            "event_count": self.event_count,
            "store_commits": self.store_commits,
            "fingerprint": self.fingerprint,
            "skipped_tweets": self.skipped_tweets,
            "runtime": self.runtime,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**{k: data[k] for k in (
            "method", "wall_time", "documents", "event_count", "store_commits")},
            fingerprint=data.get("fingerprint", ""), skipped_tweets=data.get("skipped_tweets", 0),
            runtime=data.get("runtime", {}))


@dataclass
class OverlapReport:
    clusters_containing_keywords: int
    total_clusters: int
    keywords_in_clusters: int
    total_keywords: int

    @property
    def cluster_rate(self) -> float:
        return self.clusters_containing_keywords / self.total_clusters if self.total_clusters else 0.0

    @property
    def keyword_rate(self) -> float:
        return self.keywords_in_clusters / self.total_keywords if self.total_keywords else 0.0

    @property
    def rates(self) -> tuple:
        return self.cluster_rate, self.keyword_rate

    def to_dict(self) -> dict:
        return {
            "clusters_containing_keywords": self.clusters_containing_keywords,
            "total_clusters": self.total_clusters,
            "keywords_in_clusters": self.keywords_in_clusters,
            "total_keywords": self.total_keywords,
            "cluster_rate": self.cluster_rate,
            "keyword_rate": self.keyword_rate,
        }


def compare(word_events: Iterable[WordEvent], cluster_events: Iterable[ClusterEvent],
            word_fingerprint: Optional[str] = None,
            cluster_fingerprint: Optional[str] = None) -> OverlapReport:
    """Overlap between detected keywords and cluster events.

    A cluster event includes a keyword when the keyword is one of its top
    terms. Keywords are counted once each however many documents flagged them.
    """
    if word_fingerprint and cluster_fingerprint and word_fingerprint != cluster_fingerprint:
        raise CorpusMismatchError("event sets come from different corpora")
    keywords = {e.term for e in word_events}
    clusters = [frozenset(t for t, _ in e.top_terms) for e in cluster_events]
    containing = sum(1 for terms in clusters if terms & keywords)
    covered = {k for k in keywords if any(k in terms for terms in clusters)}
    return OverlapReport(containing, len(clusters), len(covered), len(keywords))


# -- running experiments ----------------------------------------------------


@dataclass
class Experiment:
    """Result of one timed run plus everything needed to write its outputs."""

    report: RunReport
    events: list
    store: object
    run: object = None


def run_method(method: Method, tweets: list[RawTweet], *, store=None,
               key_params: Optional[KeyParams] = None, cluster_params: Optional[ClusterParams] = None,
               sleep_ms: float = 0.0, tasks: int = 4, grouping: str = "direct",
               barrier: Optional[str] = None, seed: Optional[int] = 0,
               queue_bound: int = rt.DEFAULT_QUEUE_BOUND, preprocessor: Optional[Preprocessor] = None,
               window_seconds: int = DEFAULT_WINDOW_SECONDS, stream_start: Optional[int] = None) -> Experiment:
    method = Method(method)
    store = store if store is not None else MemoryStore()
    preprocessor = preprocessor or Preprocessor()
    common = dict(tasks=tasks, seed=seed, queue_bound=queue_bound, preprocessor=preprocessor,
                  window_seconds=window_seconds, stream_start=stream_start)
    start = time.perf_counter()
    if method is Method.CLUSTERING:
        mode = rt.BarrierMode.sleep(sleep_ms) if barrier == "sleep" else rt.BarrierMode.direct()
        result = run_clustering(tweets, store, cluster_params, mode=mode, grouping=grouping, **common)
        skipped = result.skipped_tweets
    else:
        mode = rt.BarrierMode.sleep(sleep_ms) if method is Method.KEYBASED_SLEEP else rt.BarrierMode.direct()
        result = run_keybased(tweets, store, key_params, mode=mode, **common)
        skipped = 0
    wall = time.perf_counter() - start
    report = RunReport(method, wall, result.report.documents, len(result.events), store.commits,
                       corpus_fingerprint(tweets), skipped, result.report.to_dict())
    return Experiment(report, result.events, store, result)


def write_outputs(exp: Experiment, out_dir, write_store_snapshot: bool = True) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(exp.report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if exp.report.method is Method.CLUSTERING:
        name = "cluster-events.jsonl"
    else:
        name = "events.jsonl"
        write_charts(exp.events, os.path.join(out_dir, "charts"))
    write_events(os.path.join(out_dir, name), exp.events)
    if write_store_snapshot:
        with open(os.path.join(out_dir, "store-snapshot.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump_snapshot(exp.store.snapshot()))


def write_events(path, events: Iterable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in events:
            fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")


def read_events(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            cls = ClusterEvent if rec.get("type") == "cluster_event" else WordEvent
            out.append(cls.from_record(rec))
    return out


def read_report(path) -> RunReport:
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    with open(path, encoding="utf-8") as fh:
        return RunReport.from_dict(json.load(fh))
