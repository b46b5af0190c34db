"""Persistence for global clusters, word tf-idf histories and event records.

Snapshot files are UTF-8, one JSON object per line. The first line is a
header::

    {"format": "tweetstorm-snapshot", "version": 1, "last_doc": 12,
     "next_cluster_id": 40, "records": 57}

followed by exactly ``records`` lines, each tagged by ``"type"``:
``cluster``, ``history``, ``word_event`` or ``cluster_event``.
Readers must reject a ``version`` they do not know.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .clustering import Cluster
from .runtime import ProtocolError

SNAPSHOT_FORMAT = "tweetstorm-snapshot"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"record {index}: {message}")


@dataclass
class StoreSnapshot:
    clusters: list = field(default_factory=list)
    word_histories: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    last_doc: Optional[int] = None
    next_cluster_id: int = 0

    def copy(self) -> "StoreSnapshot":
        return StoreSnapshot(
            [c.copy() for c in self.clusters],
            {t: list(h) for t, h in self.word_histories.items()},
            [dict(e) for e in self.events],
            self.last_doc,
            self.next_cluster_id,
        )


def _line(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, allow_nan=False)


def dump_snapshot(snap: StoreSnapshot) -> str:
    records = [{"type": "cluster", **c.to_record()} for c in snap.clusters]
    for term in sorted(snap.word_histories):
        points = [[int(d), float(v)] for d, v in snap.word_histories[term]]
        records.append({"type": "history", "term": term, "points": points})
    records.extend(snap.events)
    header = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "last_doc": snap.last_doc,
        "next_cluster_id": snap.next_cluster_id,
        "records": len(records),
    }
    return "".join(_line(r) + "\n" for r in [header, *records])


def parse_snapshot(text: str) -> StoreSnapshot:
    # only "\n" separates records; terms may contain other Unicode line breaks
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SnapshotError("missing header", 0)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise SnapshotError("unreadable header", 0) from None
    if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError("not a snapshot file", 0)
    if header.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported version {header.get('version')!r}", 0)

    snap = StoreSnapshot(last_doc=header["last_doc"], next_cluster_id=int(header["next_cluster_id"]))
    expected = int(header["records"])
    body = lines[1:]
    for i, line in enumerate(body, start=1):
        try:
            rec = json.loads(line)
            kind = rec["type"]
            if kind == "cluster":
                snap.clusters.append(Cluster.from_record(rec))
            elif kind == "history":
                snap.word_histories[rec["term"]] = [(int(d), float(v)) for d, v in rec["points"]]
            elif kind in ("word_event", "cluster_event"):
                snap.events.append(rec)
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except (ValueError, KeyError, TypeError) as exc:
            raise SnapshotError(f"corrupt record ({exc})", i) from None
    if len(body) != expected:
        raise SnapshotError(f"truncated snapshot: {len(body)} of {expected} records", len(body) + 1)
    seen = set()
    for i, c in enumerate(snap.clusters, start=1):
        if c.id in seen:
            raise SnapshotError(f"duplicate cluster id {c.id}", i)
        seen.add(c.id)
    return snap


def read_snapshot(path) -> StoreSnapshot:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh.read())


def write_snapshot(path, snap: StoreSnapshot) -> None:
    """Write atomically: temp file in the same directory, fsync, rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".snapshot-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump_snapshot(snap))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class MemoryStore:
    """In-process store; each commit swaps in a complete new state."""

    def __init__(self, snapshot: Optional[StoreSnapshot] = None):
        self._state = snapshot.copy() if snapshot is not None else StoreSnapshot()
        self._lock = threading.Lock()
        self.commits = 0
        self.loads = 0

    @property
    def last_committed(self) -> Optional[int]:
        return self._state.last_doc

    @property
    def next_cluster_id(self) -> int:
        return self._state.next_cluster_id

    def load_clusters(self) -> list:
        with self._lock:
            state = self._state
            self.loads += 1
        return [c.copy() for c in state.clusters]

    def snapshot(self) -> StoreSnapshot:
        with self._lock:
            return self._state.copy()

    def word_history(self, term: str) -> list:
        return list(self._state.word_histories.get(term, ()))

    def commit_document(self, doc: int, upserts: Iterable[Cluster] = (), deletes: Iterable[int] = (),
                        events: Iterable[dict] = (), histories: Optional[dict] = None) -> None:
        with self._lock:
            current = self._state
            if current.last_doc is not None and doc <= current.last_doc:
                raise ProtocolError(f"document {doc} already committed (last commit: {current.last_doc})")
            new = current.copy()
            index = {c.id: i for i, c in enumerate(new.clusters)}
            for c in upserts:
                if c.id is None:
                    raise ProtocolError("cannot store a cluster without an id")
                if c.id in index:
                    new.clusters[index[c.id]] = c.copy()
                else:
                    index[c.id] = len(new.clusters)
                    new.clusters.append(c.copy())
                new.next_cluster_id = max(new.next_cluster_id, c.id + 1)
            gone = set(deletes)
            if gone:
                new.clusters = [c for c in new.clusters if c.id not in gone]
            new.events.extend(dict(e) for e in events)
            for term, points in (histories or {}).items():
                new.word_histories[term] = [(int(d), float(v)) for d, v in points]
            new.last_doc = doc
            self._persist(new)
            self._state = new
            self.commits += 1

    def _persist(self, state: StoreSnapshot) -> None:
        pass


class FileStore(MemoryStore):
    """Store mirrored to a snapshot file rewritten atomically on each commit."""

    def __init__(self, path):
        self.path = os.fspath(path)
        snapshot = read_snapshot(self.path) if os.path.exists(self.path) else None
        super().__init__(snapshot)

    def _persist(self, state: StoreSnapshot) -> None:
        write_snapshot(self.path, state)


def open_store(spec: str) -> MemoryStore:
    """``memory`` or ``file:PATH``."""
    if spec == "memory":
        return MemoryStore()
    if spec.startswith("file:") and len(spec) > 5:
        return FileStore(spec[5:])
    raise ValueError(f"unknown store {spec!r}; expected 'memory' or 'file:PATH'")
