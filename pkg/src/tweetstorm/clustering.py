"""Two-phase incremental clustering event detector.

Clustering tasks build *local* clusters from the tweets of one document.
At the end of the document a single detector task merges the local lists,
folds them into the *global* clusters kept in the store, and flags global
clusters whose share of tweets added this document exceeds the growth
threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from . import runtime as rt
from .ingest import DEFAULT_WINDOW_SECONDS, EndOfDocument, RawTweet, replay
from .preprocess import Preprocessor, vectorize


class ZeroVectorError(ValueError):
    pass


@dataclass
class ClusterParams:
    similarity_threshold: float = 0.5
    growth_threshold: float = 0.5
    num_tweet_threshold: int = 30
    prune_weight_established: float = 0.01
    prune_weight_new: float = 0.05
    established_size: int = 50
    inactivity_blocks: int = 3
    best_fit: bool = False

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ValueError("similarity_threshold must lie in (0, 1]")
        if self.growth_threshold <= 0:
            raise ValueError("growth_threshold must be positive")
        for name in ("num_tweet_threshold", "established_size", "inactivity_blocks"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (0 < self.prune_weight_established < 1 and 0 < self.prune_weight_new < 1):
            raise ValueError("prune weights must lie in (0, 1)")


@dataclass
class Cluster:
    weights: dict
    total_tweets: int = 1
    tweets_added_this_block: int = 1
    created_doc: int = 0
    last_active_doc: int = 0
    id: Optional[int] = None
    _norm: float = field(default=-1.0, init=False, repr=False, compare=False)

    @property
    def norm(self) -> float:
        if self._norm < 0:
            self._norm = math.sqrt(sum(w * w for w in self.weights.values()))
        return self._norm

    def set_weights(self, weights: dict) -> None:
        self.weights = weights
        self._norm = -1.0

    def copy(self) -> "Cluster":
        return replace(self, weights=dict(self.weights))

    def top_terms(self, k: int = 10) -> list:
        return sorted(self.weights.items(), key=lambda kv: (-kv[1], kv[0]))[:k]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "weights": self.weights,
            "total_tweets": self.total_tweets,
            "tweets_added_this_block": self.tweets_added_this_block,
            "created_doc": self.created_doc,
            "last_active_doc": self.last_active_doc,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Cluster":
        return cls(
            weights={str(k): float(v) for k, v in rec["weights"].items()},
            total_tweets=int(rec["total_tweets"]),
            tweets_added_this_block=int(rec["tweets_added_this_block"]),
            created_doc=int(rec["created_doc"]),
            last_active_doc=int(rec["last_active_doc"]),
            id=rec["id"],
        )


@dataclass(frozen=True)
class ClusterEvent:
    cluster_id: int
    doc: int
    growth_rate: float
    top_terms: tuple
    total_tweets: int = 0

    def to_record(self) -> dict:
        return {
            "type": "cluster_event",
            "cluster_id": self.cluster_id,
            "doc": self.doc,
            "growth_rate": self.growth_rate,
            "total_tweets": self.total_tweets,
            "top_terms": [[t, w] for t, w in self.top_terms],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ClusterEvent":
        return cls(int(rec["cluster_id"]), int(rec["doc"]), float(rec["growth_rate"]),
                   tuple((str(t), float(w)) for t, w in rec["top_terms"]),
                   int(rec.get("total_tweets", 0)))


# -- similarity and weight maps --------------------------------------------


def _dot(a: dict, b: dict) -> float:
    if len(a) > len(b):
        a, b = b, a
    get = b.get
    return sum(w * get(t, 0.0) for t, w in a.items())


def cosine(a: dict, b: dict) -> float:
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return _dot(a, b) / (na * nb)


def _similarity(a: Cluster, b: Cluster) -> float:
    return _dot(a.weights, b.weights) / (a.norm * b.norm)


def _normalized(weights: dict) -> dict:
    total = sum(weights.values())
    return {t: w / total for t, w in weights.items()}


def merge_weights(a, b) -> dict:
    """Tweet-count weighted average of two weight maps, renormalized.

    Either argument may be a :class:`Cluster` or a bare weight map, which
    counts as a single tweet.
    """
    wa, na = (a.weights, a.total_tweets) if isinstance(a, Cluster) else (a, 1)
    wb, nb = (b.weights, b.total_tweets) if isinstance(b, Cluster) else (b, 1)
    n = na + nb
    merged = {t: na * w / n for t, w in wa.items()}
    for t, w in wb.items():
        merged[t] = merged.get(t, 0.0) + nb * w / n
    return _normalized(merged)


def prune_weights(c: Cluster, params: ClusterParams, fresh: bool = False) -> Cluster:
    """Drop low-weight terms in place and renormalize.

    ``fresh`` selects the stricter rule for clusters about to enter the store;
    otherwise only clusters above ``established_size`` tweets are pruned.
    """
    if fresh:
        cutoff = params.prune_weight_new
    elif c.total_tweets > params.established_size:
        cutoff = params.prune_weight_established
    else:
        return c
    kept = {t: w for t, w in c.weights.items() if w >= cutoff}
    if not kept:
        term, w = min(c.weights.items(), key=lambda kv: (-kv[1], kv[0]))
        kept = {term: w}
    c.set_weights(_normalized(kept))
    return c


def _absorb(into: Cluster, other: Cluster) -> None:
    into.set_weights(merge_weights(into, other))
    into.total_tweets += other.total_tweets
    into.tweets_added_this_block += other.tweets_added_this_block
    into.created_doc = min(into.created_doc, other.created_doc)
    into.last_active_doc = max(into.last_active_doc, other.last_active_doc)
    if other.id is not None and (into.id is None or other.id < into.id):
        into.id = other.id


def assign_tweet(weights: dict, local: list, params: ClusterParams, doc: int = 0) -> list:
    """Put one tweet vector into the first (or best) similar local cluster.

    Mutates and returns ``local``. Empty vectors are ignored.
    """
    if not weights:
        return local
    norm = math.sqrt(sum(w * w for w in weights.values()))
    threshold = params.similarity_threshold
    target = None
    best = -1.0
    for c in local:
        sim = _dot(weights, c.weights) / (norm * c.norm)
        if sim >= threshold:
            if not params.best_fit:
                target = c
                break
            if sim > best:
                best, target = sim, c
    if target is None:
        local.append(Cluster(dict(weights), 1, 1, doc, doc))
    else:
        target.set_weights(merge_weights(target, weights))
        target.total_tweets += 1
        target.tweets_added_this_block += 1
        target.last_active_doc = max(target.last_active_doc, doc)
    return local


def local_merge(locals_: Iterable[Iterable[Cluster]], params: ClusterParams,
                dropped: Optional[list] = None) -> list:
    """Greedily merge per-task cluster lists, then drop undersized clusters.

    Clusters are visited in (task, creation) order and each joins the earliest
    accepted cluster it is similar to. Removed clusters are appended to
    ``dropped`` when given.
    """
    accepted: list[Cluster] = []
    threshold = params.similarity_threshold
    for task_list in locals_:
        for c in task_list:
            for a in accepted:
                if _similarity(a, c) >= threshold:
                    _absorb(a, c)
                    prune_weights(a, params)
                    break
            else:
                accepted.append(c.copy())
    kept = []
    for c in accepted:
        if c.total_tweets >= params.num_tweet_threshold:
            kept.append(c)
        elif dropped is not None:
            dropped.append(c)
    return kept


def growth_rate(added: int, total: int) -> float:
    if total <= 0:
        raise ValueError("growth rate is undefined for an empty cluster")
    return added / total


@dataclass
class GlobalMergeResult:
    clusters: list
    upserts: list
    deletes: list
    events: list
    next_id: int


def global_merge(local: list, globals_: list, doc: int, params: ClusterParams,
                 next_id: int) -> GlobalMergeResult:
    """Fold merged local clusters into the global clusters for document ``doc``.

    Each global cluster, in store order, keeps absorbing similar local
    clusters until none is left that matches its updated weights. Updated
    globals are event candidates; leftovers become new globals with fresh ids;
    globals idle for ``inactivity_blocks`` documents are evicted.
    """
    threshold = params.similarity_threshold
    remaining = [c.copy() for c in local]
    clusters = [g.copy() for g in globals_]
    upserts, events = [], []

    for g in clusters:
        absorbed = False
        changed = True
        while changed and remaining:
            changed = False
            rest = []
            for l in remaining:
                if _similarity(g, l) >= threshold:
                    _absorb(g, l)
                    prune_weights(g, params)
                    absorbed = changed = True
                else:
                    rest.append(l)
            remaining = rest
        if absorbed:
            g.last_active_doc = doc
            rate = growth_rate(g.tweets_added_this_block, g.total_tweets)
            if rate > params.growth_threshold:
                events.append(ClusterEvent(g.id, doc, rate, tuple(g.top_terms()), g.total_tweets))
            upserts.append(g)

    for l in remaining:
        prune_weights(l, params, fresh=True)
        l.id = next_id
        next_id += 1
        l.created_doc = l.last_active_doc = doc
        clusters.append(l)
        upserts.append(l)

    horizon = doc - params.inactivity_blocks
    deletes = [g.id for g in clusters if g.last_active_doc <= horizon]
    survivors = [g for g in clusters if g.last_active_doc > horizon]
    for g in survivors:
        g.tweets_added_this_block = 0
    return GlobalMergeResult(survivors, upserts, deletes, events, next_id)


# -- topology ---------------------------------------------------------------


class ClusteringBolt(rt.Bolt):
    def __init__(self, params: ClusterParams):
        self.params = params
        self.local: list[Cluster] = []

    def process(self, tup, collector):
        v = tup.payload
        assign_tweet(v.weights, self.local, self.params, v.doc)

    def end_document(self, doc, collector):
        collector.emit(rt.LocalClusters(self.context.task, self.local, doc), doc)
        self.local = []


class ClusterDetectorBolt(rt.Bolt):
    """Single task owning the global store; one load and one commit per document."""

    def __init__(self, store, params: ClusterParams, sink: list):
        self.store = store
        self.params = params
        self.sink = sink
        self.pending: dict[int, list] = {}

    def process(self, tup, collector):
        lc = tup.payload
        self.pending[lc.task] = lc.clusters

    def end_document(self, doc, collector):
        locals_ = [self.pending[t] for t in sorted(self.pending)]
        self.pending = {}
        merged = local_merge(locals_, self.params)
        result = global_merge(merged, self.store.load_clusters(), doc, self.params,
                              self.store.next_cluster_id)
        self.store.commit_document(doc, result.upserts, result.deletes,
                                   [e.to_record() for e in result.events])
        self.sink.extend(result.events)


@dataclass
class ClusteringRun:
    events: list
    report: rt.RunReport
    skipped_tweets: int
    store: object


class _VectorSpout:
    def __init__(self, tweets, preprocessor, window_seconds, stream_start):
        self.tweets = tweets
        self.preprocessor = preprocessor
        self.window_seconds = window_seconds
        self.stream_start = stream_start
        self.skipped = 0

    def __iter__(self):
        pre = self.preprocessor
        for item in replay(self.tweets, self.window_seconds, self.stream_start):
            if type(item) is EndOfDocument:
                yield item
                continue
            tweet, doc = item
            weights = vectorize(pre(tweet.text))
            if not weights:
                self.skipped += 1
                continue
            yield rt.Vector(tweet.id, doc, weights), doc


def build_topology(tweets: Iterable[RawTweet], store, params: ClusterParams, sink: list, *,
                   tasks: int = 4, grouping: str = "direct", preprocessor: Optional[Preprocessor] = None,
                   window_seconds: int = DEFAULT_WINDOW_SECONDS, stream_start: Optional[int] = None):
    spout = _VectorSpout(tweets, preprocessor or Preprocessor(), window_seconds, stream_start)
    edge = rt.Grouping.direct() if grouping == "direct" else rt.Grouping.shuffle()
    topo = rt.Topology(spout)
    topo.add_bolt("cluster", lambda: ClusteringBolt(params), tasks, {rt.SPOUT: edge})
    topo.add_bolt("detector", lambda: ClusterDetectorBolt(store, params, sink), 1,
                  {"cluster": rt.Grouping.global_()})
    return topo, spout


def run_clustering(tweets: Iterable[RawTweet], store, params: Optional[ClusterParams] = None, *,
                   mode: rt.BarrierMode = rt.BarrierMode.direct(), tasks: int = 4,
                   grouping: str = "direct", seed: Optional[int] = 0,
                   queue_bound: int = rt.DEFAULT_QUEUE_BOUND,
                   preprocessor: Optional[Preprocessor] = None,
                   window_seconds: int = DEFAULT_WINDOW_SECONDS,
                   stream_start: Optional[int] = None, trace: bool = False) -> ClusteringRun:
    params = params or ClusterParams()
    events: list[ClusterEvent] = []
    topo, spout = build_topology(tweets, store, params, events, tasks=tasks, grouping=grouping,
                                 preprocessor=preprocessor, window_seconds=window_seconds,
                                 stream_start=stream_start)
    report = rt.run(topo, mode, queue_bound=queue_bound, seed=seed, trace=trace)
    return ClusteringRun(events, report, spout.skipped, store)
