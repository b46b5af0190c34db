"""Command line entry point: ``tweetstorm <subcommand> ...``.

Exit codes: 0 success, 1 run error, 2 comparison mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .clustering import ClusterParams
from .evaluation import (CorpusMismatchError, Method, compare, read_events, read_report,
                         run_method, write_outputs)
from .ingest import DEFAULT_WINDOW_SECONDS, CorpusError, read_corpus
from .keybased import KeyParams
from .preprocess import Preprocessor
from .runtime import DEFAULT_QUEUE_BOUND, BoltFailure, ProtocolError, TopologyError
from .store import FileStore, SnapshotError, open_store
from .synthetic import Burst, SyntheticSpec, gen_synthetic

log = logging.getLogger("tweetstorm")

EXIT_OK, EXIT_RUN_ERROR, EXIT_MISMATCH = 0, 1, 2


def _seed(value: str):
    return None if value.lower() == "none" else int(value)


def _tasks(value: str):
    if "=" in value:
        bolt, n = value.split("=", 1)
        return bolt, int(n)
    return None, int(value)


def _burst(value: str) -> Burst:
    term, doc, count = value.rsplit(":", 2)
    return Burst(term, int(doc), int(count))


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--window-seconds", type=int, default=DEFAULT_WINDOW_SECONDS)
    p.add_argument("--stream-start", type=int, default=None)
    p.add_argument("--country", default=None)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--no-stemming", action="store_true")
    p.add_argument("--barrier", choices=("direct", "sleep"), default="direct")
    p.add_argument("--sleep-ms", type=float, default=0.0)
    p.add_argument("--tasks", type=_tasks, action="append", default=[], metavar="BOLT=N")
    p.add_argument("--queue-bound", type=int, default=DEFAULT_QUEUE_BOUND)
    p.add_argument("--seed", type=_seed, default=0, help="integer, or 'none' for unseeded shuffles")
    p.add_argument("--store", default="memory", help="memory or file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tweetstorm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-keybased", help="word-burst event detection")
    _add_run_args(p)
    p.add_argument("--common-threshold", type=int, default=10)
    p.add_argument("--event-rate", type=float, default=2.0)
    p.add_argument("--floor", type=float, default=1e-4)

    p = sub.add_parser("run-clustering", help="clustering event detection")
    _add_run_args(p)
    p.add_argument("--similarity", type=float, default=0.5)
    p.add_argument("--growth", type=float, default=0.5)
    p.add_argument("--min-cluster", type=int, default=30)
    p.add_argument("--inactivity", type=int, default=3)
    p.add_argument("--prune-established", type=float, default=0.01)
    p.add_argument("--prune-new", type=float, default=0.05)
    p.add_argument("--established-size", type=int, default=50)
    p.add_argument("--grouping", choices=("direct", "shuffle"), default="direct")
    p.add_argument("--best-fit", action="store_true")

    p = sub.add_parser("compare", help="overlap between keyword and cluster events")
    p.add_argument("keybased", help="run-keybased output directory")
    p.add_argument("clustering", help="run-clustering output directory")

    p = sub.add_parser("gen-synthetic", help="write a synthetic corpus and ground truth")
    p.add_argument("--spec", default=None, help="JSON file with generator settings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="ground-truth sidecar (default: OUT.truth.jsonl)")
    p.add_argument("--documents", type=int)
    p.add_argument("--tweets-per-doc", type=int)
    p.add_argument("--words-per-tweet", type=int)
    p.add_argument("--vocabulary", type=int, dest="vocabulary_size")
    p.add_argument("--background", choices=("zipf", "uniform", "constant"))
    p.add_argument("--noise", type=float)
    p.add_argument("--burst", type=_burst, action="append", default=[], metavar="TERM:DOC:COUNT")

    p = sub.add_parser("report", help="print run reports as JSON lines")
    p.add_argument("paths", nargs="+")
    return parser


def _task_count(args, bolt: str) -> int:
    n = 4
    for name, count in args.tasks:
        if name is None or name == bolt:
            n = count
        elif name in ("detector", "compare"):
            if count != 1:
                raise TopologyError(f"bolt {name!r} runs as a single task")
        else:
            raise TopologyError(f"unknown bolt {name!r}; expected {bolt!r}")
    return n


def _cmd_run(args) -> int:
    tweets = read_corpus(args.corpus, country=args.country)
    store = open_store(args.store)
    pre = Preprocessor.from_options(args.stopwords, not args.no_stemming)
    common = dict(store=store, sleep_ms=args.sleep_ms, seed=args.seed, queue_bound=args.queue_bound,
                  preprocessor=pre, window_seconds=args.window_seconds, stream_start=args.stream_start)
    if args.command == "run-keybased":
        method = Method.KEYBASED_SLEEP if args.barrier == "sleep" else Method.KEYBASED_DIRECT
        params = KeyParams(args.event_rate, args.common_threshold, args.floor)
        exp = run_method(method, tweets, key_params=params, tasks=_task_count(args, "count"), **common)
    else:
        params = ClusterParams(args.similarity, args.growth, args.min_cluster, args.prune_established,
                               args.prune_new, args.established_size, args.inactivity, args.best_fit)
        exp = run_method(Method.CLUSTERING, tweets, cluster_params=params, barrier=args.barrier,
                         grouping=args.grouping, tasks=_task_count(args, "cluster"), **common)
    if args.out:
        write_outputs(exp, args.out, write_store_snapshot=not isinstance(store, FileStore))
    summary = exp.report.to_dict()
    summary.pop("runtime")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_compare(args) -> int:
    kb, cl = read_report(args.keybased), read_report(args.clustering)
    word_events = read_events(os.path.join(args.keybased, "events.jsonl"))
    cluster_events = read_events(os.path.join(args.clustering, "cluster-events.jsonl"))
    try:
        overlap = compare(word_events, cluster_events, kb.fingerprint, cl.fingerprint)
    except CorpusMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    print(json.dumps(overlap.to_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = SyntheticSpec.from_dict(json.load(fh))
    else:
        spec = SyntheticSpec()
    for name in ("documents", "tweets_per_doc", "words_per_tweet", "vocabulary_size", "background", "noise"):
        value = getattr(args, name)
        if value is not None:
            setattr(spec, name, value)
    spec.bursts = list(spec.bursts) + args.burst
    truth = args.truth or args.out + ".truth.jsonl"
    corpus = gen_synthetic(spec, args.seed, args.out, truth)
    print(json.dumps({"corpus": args.out, "truth": truth, "tweets": len(corpus.tweets),
                      "planted": len(corpus.truth)}, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    for path in args.paths:
        print(json.dumps(read_report(path).to_dict() | {"path": path}, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run-keybased": _cmd_run, "run-clustering": _cmd_run, "compare": _cmd_compare,
                "gen-synthetic": _cmd_gen, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except (CorpusError, BoltFailure, ProtocolError, TopologyError, SnapshotError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_ERROR


if __name__ == "__main__":
    sys.exit(main())
