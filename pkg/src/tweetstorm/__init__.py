"""Event detection over replayed tweet streams on a small Storm-like runtime."""
from .clustering import Cluster, ClusterEvent, ClusterParams, cosine, run_clustering
from .ingest import EndOfDocument, RawTweet, assign_document, read_corpus, replay
from .keybased import KeyParams, WordEvent, run_keybased
from .preprocess import Preprocessor, preprocess, vectorize
from .runtime import BarrierMode, Grouping, Topology, run
from .store import FileStore, MemoryStore

__all__ = [
    "BarrierMode", "Cluster", "ClusterEvent", "ClusterParams", "EndOfDocument", "FileStore",
    "Grouping", "KeyParams", "MemoryStore", "Preprocessor", "RawTweet", "Topology", "WordEvent",
    "assign_document", "cosine", "preprocess", "read_corpus", "replay", "run", "run_clustering",
    "run_keybased", "vectorize",
]
