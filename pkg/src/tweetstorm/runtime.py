"""A small in-process dataflow engine modelled on Storm.

A :class:`Topology` has one spout (any iterable of ``(payload, doc)`` pairs and
:class:`~tweetstorm.ingest.EndOfDocument` markers) and a DAG of bolts. Every
bolt task runs on its own thread and owns its bolt instance; tasks talk only
through bounded channels.

End-of-document markers travel through the graph as control tuples. A task
calls :meth:`Bolt.end_document` once it has seen the marker from every
upstream task; because channels are FIFO this happens only after all of the
document's data tuples reached it. Under :meth:`BarrierMode.direct` every
task then acknowledges the document and the spout holds back the next
document until all acknowledgements are in. Under :meth:`BarrierMode.sleep`
the spout just pauses and carries on.
"""
from __future__ import annotations

import enum
import itertools
import logging
import random
import threading
import time
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Optional

from .ingest import EndOfDocument

log = logging.getLogger(__name__)

SPOUT = "spout"
DEFAULT_QUEUE_BOUND = 10_000


class TopologyError(ValueError):
    pass


class ProtocolError(RuntimeError):
    """Barrier or store protocol violation."""


class BoltFailure(RuntimeError):
    def __init__(self, bolt: str, task: int, doc: Optional[int], cause: Optional[BaseException] = None):
        self.bolt = bolt
        self.task = task
        self.doc = doc
        msg = f"bolt {bolt!r} task {task} failed while processing document {doc}"
        if cause is not None:
            msg += f": {type(cause).__name__}: {cause}"
        super().__init__(msg)


class _Aborted(Exception):
    pass


# -- payloads ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Word:
    term: str
    doc: int


@dataclass(frozen=True, slots=True)
class Vector:
    tweet_id: str
    doc: int
    weights: dict


@dataclass(frozen=True, slots=True)
class EOD:
    doc: int


@dataclass(frozen=True, slots=True)
class Candidate:
    term: str
    doc: int
    stats: Any


@dataclass(frozen=True, slots=True)
class LocalClusters:
    task: int
    clusters: list
    doc: int


@dataclass(slots=True)
class Tuple:
    payload: Any
    doc: int
    source_task: int = 0
    source: str = SPOUT


_STOP = object()


# -- groupings --------------------------------------------------------------


class GroupingKind(enum.Enum):
    SHUFFLE = "shuffle"
    FIELDS = "fields"
    ALL = "all"
    GLOBAL = "global"
    DIRECT = "direct"


def field_hash(key: Any, seed: int = 0) -> int:
    """Process-independent hash used by fields grouping."""
    data = key.encode("utf-8") if isinstance(key, str) else repr(key).encode("utf-8")
    return zlib.crc32(data, seed & 0xFFFFFFFF)


class Grouping:
    """Routing rule for one edge.

    Shuffle and direct groupings carry state (an RNG, a round-robin cursor).
    The runtime gives every producer task its own copy via :meth:`fresh`.
    """

    def __init__(self, kind: GroupingKind, key: Optional[Callable[[Any], Any]] = None, seed: Optional[int] = None):
        if kind is GroupingKind.FIELDS and key is None:
            raise TopologyError("fields grouping needs a key extractor")
        self.kind = kind
        self.key = key
        self.seed = seed
        self._rng = random.Random(seed)
        self._cursor = 0

    @classmethod
    def shuffle(cls, seed: Optional[int] = None) -> "Grouping":
        return cls(GroupingKind.SHUFFLE, seed=seed)

    @classmethod
    def fields(cls, key: Callable[[Any], Any], seed: int = 0) -> "Grouping":
        return cls(GroupingKind.FIELDS, key=key, seed=seed)

    @classmethod
    def all(cls) -> "Grouping":
        return cls(GroupingKind.ALL)

    @classmethod
    def global_(cls) -> "Grouping":
        return cls(GroupingKind.GLOBAL)

    @classmethod
    def direct(cls) -> "Grouping":
        return cls(GroupingKind.DIRECT)

    def fresh(self, seed: Optional[int] = None) -> "Grouping":
        """Copy with reset state; ``seed`` applies only when none was given."""
        return Grouping(self.kind, self.key, self.seed if self.seed is not None else seed)

    def route(self, payload: Any, task_count: int) -> list[int]:
        kind = self.kind
        if kind is GroupingKind.FIELDS:
            return [field_hash(self.key(payload), self.seed or 0) % task_count]
        if kind is GroupingKind.SHUFFLE:
            return [self._rng.randrange(task_count)]
        if kind is GroupingKind.DIRECT:
            i = self._cursor % task_count
            self._cursor = i + 1
            return [i]
        if kind is GroupingKind.GLOBAL:
            return [0]
        return list(range(task_count))

    def __repr__(self):
        return f"Grouping({self.kind.value})"


def route(tup: Tuple, grouping: Grouping, task_count: int) -> list[int]:
    if task_count < 1:
        raise ValueError("task_count must be >= 1")
    return grouping.route(tup.payload, task_count)


# -- barrier ----------------------------------------------------------------


@dataclass(frozen=True)
class BarrierMode:
    kind: str = "direct"
    sleep_ms: float = 0.0

    @classmethod
    def direct(cls) -> "BarrierMode":
        return cls("direct")

    @classmethod
    def sleep(cls, ms: float) -> "BarrierMode":
        if ms < 0:
            raise ValueError("sleep duration must be >= 0")
        return cls("sleep", ms)

    @property
    def is_direct(self) -> bool:
        return self.kind == "direct"


class DocumentBarrier:
    """Collects end-of-document acknowledgements from a fixed participant set."""

    def __init__(self, participants: Iterable[Hashable]):
        self.participants = frozenset(participants)
        if not self.participants:
            raise ValueError("barrier needs at least one participant")
        self._cond = threading.Condition()
        self._open: Optional[int] = None
        self._acked: set = set()
        self._released = -1

    def open(self, doc: int) -> None:
        with self._cond:
            if self._open is not None and self._released < self._open:
                raise ProtocolError(f"document {doc} opened before document {self._open} was released")
            if doc <= self._released:
                raise ProtocolError(f"document {doc} already released")
            self._open = doc
            self._acked = set()

    def ack(self, participant: Hashable, doc: int) -> bool:
        """Record one acknowledgement; returns True once ``doc`` is released."""
        with self._cond:
            if participant not in self.participants:
                raise ProtocolError(f"unknown participant {participant!r}")
            if self._open is None or doc > self._open:
                raise ProtocolError(f"ack from {participant!r} for future document {doc}")
            if doc < self._open or participant in self._acked:
                raise ProtocolError(f"duplicate ack from {participant!r} for document {doc}")
            self._acked.add(participant)
            if self._acked == self.participants:
                self._released = doc
                self._cond.notify_all()
            return self._released >= doc

    def released(self, doc: int) -> bool:
        with self._cond:
            return self._released >= doc

    def pending(self) -> frozenset:
        with self._cond:
            return self.participants - self._acked

    def wait(self, doc: int, abort: Optional[threading.Event] = None, poll: float = 0.05) -> None:
        with self._cond:
            while self._released < doc:
                if abort is not None and abort.is_set():
                    raise _Aborted
                self._cond.wait(poll)


# -- topology ---------------------------------------------------------------


@dataclass
class TaskContext:
    bolt: str
    task: int
    task_count: int
    mode: BarrierMode


class Bolt:
    """Base class for bolts; one instance per task."""

    def prepare(self, context: TaskContext) -> None:
        self.context = context

    def process(self, tup: Tuple, collector: "Collector") -> None:
        raise NotImplementedError

    def end_document(self, doc: int, collector: "Collector") -> None:
        pass

    def cleanup(self) -> None:
        pass


class FunctionBolt(Bolt):
    """Wraps ``fn(tup, collector)`` as a stateless bolt."""

    def __init__(self, fn: Callable[[Tuple, "Collector"], None]):
        self.fn = fn

    def process(self, tup, collector):
        self.fn(tup, collector)


@dataclass
class BoltSpec:
    name: str
    factory: Callable[[], Bolt]
    tasks: int


@dataclass
class Edge:
    source: str
    target: str
    grouping: Grouping


class Topology:
    def __init__(self, spout: Iterable):
        self.spout = spout
        self.bolts: dict[str, BoltSpec] = {}
        self.edges: list[Edge] = []

    def add_bolt(self, name: str, factory: Callable[[], Bolt], tasks: int = 1,
                 inputs: Optional[dict[str, Grouping]] = None) -> "Topology":
        if name == SPOUT or name in self.bolts:
            raise TopologyError(f"duplicate component name {name!r}")
        if tasks < 1:
            raise TopologyError(f"bolt {name!r} needs at least one task")
        self.bolts[name] = BoltSpec(name, factory, tasks)
        for source, grouping in (inputs or {}).items():
            self.edges.append(Edge(source, name, grouping))
        return self

    def task_count(self, name: str) -> int:
        return 1 if name == SPOUT else self.bolts[name].tasks

    def downstream(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.source == name]

    def upstream(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.target == name]

    def validate(self) -> list[str]:
        """Check names, acyclicity and reachability; returns a topological order."""
        for e in self.edges:
            if e.source != SPOUT and e.source not in self.bolts:
                raise TopologyError(f"edge from unknown component {e.source!r}")
            if e.target not in self.bolts:
                raise TopologyError(f"edge to unknown bolt {e.target!r}")
        indegree = {name: len(self.upstream(name)) for name in self.bolts}
        order, ready = [], [SPOUT]
        while ready:
            node = ready.pop()
            for e in self.downstream(node):
                indegree[e.target] -= 1
                if indegree[e.target] == 0:
                    order.append(e.target)
                    ready.append(e.target)
        unreached = [n for n in self.bolts if n not in order]
        if unreached:
            if any(indegree[n] > 0 and self.upstream(n) for n in unreached):
                raise TopologyError(f"topology has a cycle or unreachable bolts: {sorted(unreached)}")
            raise TopologyError(f"bolts not reachable from the spout: {sorted(unreached)}")
        return order


# -- execution --------------------------------------------------------------


class Channel:
    """Bounded FIFO with blocking put and batched drain."""

    def __init__(self, bound: int, abort: threading.Event):
        if bound < 1:
            raise ValueError("queue bound must be >= 1")
        self.bound = bound
        self.high_water = 0
        self._abort = abort
        self._items: deque = deque()
        lock = threading.Lock()
        self._not_empty = threading.Condition(lock)
        self._not_full = threading.Condition(lock)

    def put(self, item) -> None:
        with self._not_full:
            while len(self._items) >= self.bound:
                if self._abort.is_set():
                    raise _Aborted
                self._not_full.wait(0.05)
            self._items.append(item)
            if len(self._items) > self.high_water:
                self.high_water = len(self._items)
            self._not_empty.notify()

    def drain(self, limit: int) -> list:
        with self._not_empty:
            while not self._items:
                if self._abort.is_set():
                    raise _Aborted
                self._not_empty.wait(0.05)
            items = self._items
            n = min(limit, len(items))
            batch = [items.popleft() for _ in range(n)]
            self._not_full.notify_all()
            return batch


class Collector:
    """Emission handle given to a bolt task (or the spout)."""

    def __init__(self, name: str, task: int, routes: list):
        self.name = name
        self.task = task
        self._routes = routes  # [(target, grouping, [channels])]
        self._by_target = {target: channels for target, _, channels in routes}
        self.doc: int = -1
        self.emitted = 0

    def emit(self, payload: Any, doc: Optional[int] = None) -> None:
        tup = Tuple(payload, self.doc if doc is None else doc, self.task, self.name)
        for _, grouping, channels in self._routes:
            for i in grouping.route(payload, len(channels)):
                channels[i].put(tup)
                self.emitted += 1

    def emit_direct(self, target: str, task: int, payload: Any, doc: Optional[int] = None) -> None:
        channels = self._by_target.get(target)
        if channels is None:
            raise TopologyError(f"{self.name!r} has no edge to {target!r}")
        channels[task].put(Tuple(payload, self.doc if doc is None else doc, self.task, self.name))
        self.emitted += 1

    def _broadcast(self, item) -> None:
        for _, _, channels in self._routes:
            for ch in channels:
                ch.put(item)


@dataclass
class RunReport:
    mode: str
    documents: int = 0
    tuples_per_document: list = field(default_factory=list)
    document_seconds: list = field(default_factory=list)
    wall_time: float = 0.0
    processed: dict = field(default_factory=dict)
    queue_high_water: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "documents": self.documents,
            "wall_time": self.wall_time,
            "tuples_per_document": list(self.tuples_per_document),
            "document_seconds": list(self.document_seconds),
            "processed": dict(self.processed),
            "queue_high_water": dict(self.queue_high_water),
        }


def count_interleavings(trace: Iterable) -> int:
    """Number of stamps whose document is older than one processed before it.

    ``trace`` holds ``(seq, bolt, task, doc)`` stamps from any set of tasks.
    """
    newest = -1
    late = 0
    for _, _, _, doc in sorted(trace):
        if doc < newest:
            late += 1
        else:
            newest = doc
    return late


class _Worker(threading.Thread):
    def __init__(self, runner: "_Runner", spec: BoltSpec, task: int, inbox: Channel,
                 collector: Collector, upstream_tasks: int):
        super().__init__(name=f"{spec.name}-{task}", daemon=True)
        self.runner = runner
        self.spec = spec
        self.task = task
        self.inbox = inbox
        self.collector = collector
        self.upstream_tasks = upstream_tasks
        self.processed = 0
        self.stamps: list = []

    def run(self) -> None:
        runner = self.runner
        name, task, collector = self.spec.name, self.task, self.collector
        eods: dict[int, int] = {}
        stops = 0
        doc = None
        try:
            bolt = self.spec.factory()
            bolt.prepare(TaskContext(name, task, self.spec.tasks, runner.mode))
            stamps = self.stamps if runner.trace else None
            seq = runner.seq
            while True:
                for tup in self.inbox.drain(runner.batch_size):
                    if tup is _STOP:
                        stops += 1
                        if stops == self.upstream_tasks:
                            bolt.cleanup()
                            collector._broadcast(_STOP)
                            return
                        continue
                    doc = tup.doc
                    payload = tup.payload
                    if type(payload) is EOD:
                        seen = eods.get(doc, 0) + 1
                        if seen < self.upstream_tasks:
                            eods[doc] = seen
                            continue
                        eods.pop(doc, None)
                        collector.doc = doc
                        bolt.end_document(doc, collector)
                        collector._broadcast(Tuple(payload, doc, task, name))
                        if runner.barrier is not None:
                            runner.barrier.ack((name, task), doc)
                        continue
                    if stamps is not None:
                        stamps.append((next(seq), name, task, doc))
                    collector.doc = doc
                    bolt.process(tup, collector)
                    self.processed += 1
        except _Aborted:
            return
        except Exception as exc:
            runner.fail(name, task, doc, exc)


class _Runner:
    def __init__(self, topology: Topology, mode: BarrierMode, queue_bound: int,
                 seed: Optional[int], trace: bool, batch_size: int):
        self.topology = topology
        self.mode = mode
        self.queue_bound = queue_bound
        self.seed = seed
        self.trace = trace
        self.batch_size = batch_size
        self.abort = threading.Event()
        self.seq = itertools.count()
        self.failure: Optional[tuple] = None
        self._fail_lock = threading.Lock()
        participants = [(n, t) for n, s in topology.bolts.items() for t in range(s.tasks)]
        self.barrier = DocumentBarrier(participants) if mode.is_direct and participants else None

    def fail(self, bolt: str, task: int, doc: Optional[int], exc: BaseException) -> None:
        with self._fail_lock:
            if self.failure is None:
                self.failure = (bolt, task, doc, exc)
        self.abort.set()

    def _routes(self, source: str, task: int, channels: dict, edge_index: dict) -> list:
        routes = []
        for e in self.topology.downstream(source):
            seed = None
            if self.seed is not None:
                seed = self.seed * 1_000_003 + edge_index[id(e)] * 1009 + task
            routes.append((e.target, e.grouping.fresh(seed), channels[e.target]))
        return routes

    def execute(self) -> RunReport:
        topo = self.topology
        topo.validate()
        report = RunReport(mode=self.mode.kind if self.mode.is_direct else f"sleep({self.mode.sleep_ms}ms)")
        channels = {
            name: [Channel(self.queue_bound, self.abort) for _ in range(spec.tasks)]
            for name, spec in topo.bolts.items()
        }
        edge_index = {id(e): i for i, e in enumerate(topo.edges)}
        workers = []
        for name, spec in topo.bolts.items():
            upstream = sum(topo.task_count(e.source) for e in topo.upstream(name))
            for t in range(spec.tasks):
                collector = Collector(name, t, self._routes(name, t, channels, edge_index))
                workers.append(_Worker(self, spec, t, channels[name][t], collector, upstream))
        spout = Collector(SPOUT, 0, self._routes(SPOUT, 0, channels, edge_index))

        start = time.perf_counter()
        for w in workers:
            w.start()
        spout_error = None
        try:
            self._pump(spout, report)
            spout._broadcast(_STOP)
        except _Aborted:
            pass
        except BaseException as exc:
            spout_error = exc
            self.abort.set()
        for w in workers:
            w.join()
        report.wall_time = time.perf_counter() - start

        if self.failure is not None:
            bolt, task, doc, exc = self.failure
            raise BoltFailure(bolt, task, doc, exc) from exc
        if spout_error is not None:
            raise spout_error

        for w in workers:
            report.processed[w.spec.name] = report.processed.get(w.spec.name, 0) + w.processed
            report.queue_high_water[w.name] = w.inbox.high_water
            report.trace.extend(w.stamps)
        report.trace.sort()
        return report

    def _pump(self, spout: Collector, report: RunReport) -> None:
        barrier = self.barrier
        sleep_s = self.mode.sleep_ms / 1000.0
        doc_start = time.perf_counter()
        count = 0
        for item in self.topology.spout:
            if self.abort.is_set():
                raise _Aborted
            if type(item) is EndOfDocument:
                doc = item.doc
                if barrier is not None:
                    barrier.open(doc)
                spout._broadcast(Tuple(EOD(doc), doc, 0, SPOUT))
                if barrier is not None:
                    barrier.wait(doc, self.abort)
                elif sleep_s > 0:
                    time.sleep(sleep_s)
                now = time.perf_counter()
                report.documents += 1
                report.tuples_per_document.append(count)
                report.document_seconds.append(now - doc_start)
                doc_start, count = now, 0
                continue
            payload, doc = item
            spout.doc = doc
            spout.emit(payload, doc)
            count += 1


def run(topology: Topology, mode: BarrierMode = BarrierMode.direct(), *,
        queue_bound: int = DEFAULT_QUEUE_BOUND, seed: Optional[int] = 0,
        trace: bool = False, batch_size: int = 256) -> RunReport:
    """Execute ``topology`` to completion and return its report.

    ``seed`` fixes shuffle groupings that were built without their own seed;
    pass ``None`` for scheduling-dependent (unseeded) shuffles.
    A failing bolt aborts the run with :class:`BoltFailure`.
    """
    return _Runner(topology, mode, queue_bound, seed, trace, batch_size).execute()
