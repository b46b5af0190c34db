import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from tweetstorm.clustering import (Cluster, ClusterEvent, ClusterParams, ZeroVectorError, assign_tweet, cosine,
                                   global_merge, growth_rate, local_merge, merge_weights, prune_weights,
                                   run_clustering)
from tweetstorm.ingest import RawTweet
from tweetstorm.preprocess import Preprocessor
from tweetstorm.runtime import BarrierMode
from tweetstorm.store import MemoryStore

from oracles import random_cluster_walk, sequential_clustering

P = ClusterParams()


def cl(weights, n=1, **kw):
    return Cluster(dict(weights), n, kw.pop("added", n), **kw)


def total(c):
    return sum(c.weights.values())


# -- cosine -------------------------------------------------------------------

def test_cosine_identical():
    assert cosine({"a": 0.3, "b": 0.7}, {"a": 0.3, "b": 0.7}) == pytest.approx(1.0)


def test_cosine_disjoint():
    assert cosine({"a": 1.0}, {"b": 1.0}) == 0.0


def test_cosine_worked_value():
    # 0.5 / (1 * sqrt(0.5))
    assert cosine({"a": 1.0}, {"a": 0.5, "b": 0.5}) == pytest.approx(0.707107, abs=1e-6)
    assert cosine({"a": 1.0}, {"a": 0.5, "b": 0.5}) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_cosine_zero_vector():
    with pytest.raises(ZeroVectorError):
        cosine({}, {"a": 1.0})
    with pytest.raises(ZeroVectorError):
        cosine({"a": 0.0}, {"a": 1.0})


@given(st.dictionaries(st.sampled_from("abcdef"), st.floats(0.01, 1), min_size=1),
       st.dictionaries(st.sampled_from("abcdef"), st.floats(0.01, 1), min_size=1))
def test_cosine_bounds_and_symmetry(a, b):
    c = cosine(a, b)
    assert -1e-12 <= c <= 1 + 1e-12
    assert c == pytest.approx(cosine(b, a))


# -- merging ------------------------------------------------------------------

def test_merge_weights_examples():
    assert merge_weights(cl({"a": 1}), cl({"b": 1})) == {"a": 0.5, "b": 0.5}
    assert merge_weights(cl({"a": 1}, 3), cl({"a": 1})) == {"a": 1.0}
    assert merge_weights(cl({"a": 1}), cl({"b": 1}, 3)) == {"a": 0.25, "b": 0.75}


def test_merge_weights_equals_centroid_of_unit_tweets():
    # {a:1} once and {b:1} three times: the mean of the four tweet vectors
    tweets = [{"a": 1.0}] + [{"b": 1.0}] * 3
    centroid = {t: sum(v.get(t, 0) for v in tweets) / 4 for t in "ab"}
    assert merge_weights(cl({"a": 1}), cl({"b": 1}, 3)) == pytest.approx(centroid)


def test_merge_weights_accepts_bare_vector():
    assert merge_weights(cl({"a": 1}, 3), {"b": 1.0}) == {"a": 0.75, "b": 0.25}


def test_prune_established_cluster():
    c = cl({"a": 0.6, "b": 0.395, "c": 0.005}, 60)
    prune_weights(c, P)
    assert "c" not in c.weights
    assert total(c) == pytest.approx(1.0, abs=1e-12)
    assert c.weights["a"] == pytest.approx(0.6 / 0.995)


def test_prune_small_cluster_untouched_on_established_path():
    c = cl({"a": 0.995, "c": 0.005}, 10)
    prune_weights(c, P)
    assert c.weights == {"a": 0.995, "c": 0.005}


def test_prune_fresh_uses_stricter_cutoff():
    c = cl({"a": 0.5, "b": 0.46, "c": 0.04}, 10)
    prune_weights(c, P, fresh=True)
    assert set(c.weights) == {"a", "b"}


def test_prune_keeps_best_term_when_everything_is_small():
    c = cl({f"t{i}": 1 / 40 for i in range(39)} | {"top": 1 / 40 + 1e-6}, 60)
    c.weights = {k: v / sum(c.weights.values()) for k, v in c.weights.items()}
    prune_weights(c, P, fresh=True)
    assert c.weights == {"top": 1.0}


def test_params_validation():
    with pytest.raises(ValueError):
        ClusterParams(similarity_threshold=0)
    with pytest.raises(ValueError):
        ClusterParams(num_tweet_threshold=0)


# -- assignment -----------------------------------------------------------------

def test_assign_bootstrap():
    local = assign_tweet({"a": 0.5, "b": 0.5}, [], P, doc=2)
    assert len(local) == 1
    c = local[0]
    assert c.weights == {"a": 0.5, "b": 0.5}
    assert (c.total_tweets, c.tweets_added_this_block, c.created_doc) == (1, 1, 2)


def test_assign_identical_is_absorbed():
    local = [cl({"a": 0.5, "b": 0.5}, 4)]
    assign_tweet({"a": 0.5, "b": 0.5}, local, P)
    assert len(local) == 1 and local[0].total_tweets == 5


def test_assign_orthogonal_creates_cluster():
    local = [cl({"a": 1.0})]
    assign_tweet({"z": 1.0}, local, P)
    assert len(local) == 2


def test_assign_empty_vector_ignored():
    local = []
    assert assign_tweet({}, local, P) == []


def test_first_fit_versus_best_fit():
    local = [cl({"a": 0.6, "x": 0.4}), cl({"a": 0.9, "y": 0.1})]
    v = {"a": 1.0}
    assign_tweet(v, local, P)
    assert [c.total_tweets for c in local] == [2, 1]
    local = [cl({"a": 0.6, "x": 0.4}), cl({"a": 0.9, "y": 0.1})]
    assign_tweet(v, local, ClusterParams(best_fit=True))
    assert [c.total_tweets for c in local] == [1, 2]


# -- local merge ------------------------------------------------------------------

def test_local_merge_two_tasks_combine_and_survive():
    w = {"a": 0.5, "b": 0.5}
    merged = local_merge([[cl(w, 20)], [cl(w, 20)]], P)
    assert len(merged) == 1 and merged[0].total_tweets == 40


def test_local_merge_size_gate():
    dropped = []
    assert local_merge([[cl({"a": 1}, 29)]], P, dropped) == []
    assert dropped[0].total_tweets == 29
    assert len(local_merge([[cl({"a": 1}, 30)]], P)) == 1


def test_local_merge_empty():
    assert local_merge([], P) == []
    assert local_merge([[], []], P) == []


def test_local_merge_does_not_mutate_inputs():
    a, b = cl({"a": 1}, 20), cl({"a": 1}, 20)
    local_merge([[a], [b]], P)
    assert a.total_tweets == 20 and b.total_tweets == 20


def test_local_merge_prefers_earliest_accepted():
    first = cl({"a": 0.7, "x": 0.3}, 30)
    second = cl({"a": 0.7, "y": 0.3}, 30)
    probe = cl({"a": 1.0}, 30)
    merged = local_merge([[first], [cl({"z": 1.0}, 40), probe], [second]], P)
    assert [c.total_tweets for c in merged] == [90, 40]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.tuples(st.dictionaries(st.sampled_from("abcdefgh"), st.floats(0.05, 1), min_size=1),
                                   st.integers(1, 80)), max_size=6), max_size=4))
def test_local_merge_conserves_tweets(spec):
    locals_ = [[cl({k: v / sum(w.values()) for k, v in w.items()}, n) for w, n in task] for task in spec]
    dropped = []
    kept = local_merge(locals_, P, dropped)
    assert sum(c.total_tweets for c in kept + dropped) == sum(n for task in spec for _, n in task)
    assert all(c.total_tweets >= P.num_tweet_threshold for c in kept)
    for c in kept + dropped:
        assert total(c) == pytest.approx(1.0, abs=1e-9)


# -- global merge -------------------------------------------------------------------

def test_fresh_store_inserts_without_event():
    res = global_merge([cl({"a": 1}, 35)], [], doc=0, params=P, next_id=0)
    assert res.events == []
    assert [c.id for c in res.clusters] == [0]
    assert res.next_id == 1
    assert res.clusters[0].tweets_added_this_block == 0
    assert res.upserts[0].created_doc == 0


def test_growth_event_on_absorbing_global():
    g = cl({"a": 1}, 40, added=0, id=7, created_doc=0, last_active_doc=0)
    res = global_merge([cl({"a": 1}, 60, created_doc=1, last_active_doc=1)], [g], doc=1, params=P, next_id=8)
    (event,) = res.events
    assert event.cluster_id == 7
    assert event.growth_rate == pytest.approx(0.6)
    assert event.top_terms == (("a", 1.0),)
    assert res.clusters[0].total_tweets == 100
    assert res.clusters[0].tweets_added_this_block == 0
    assert res.clusters[0].last_active_doc == 1


def test_growth_below_threshold_no_event():
    g = cl({"a": 1}, 70, added=0, id=0)
    res = global_merge([cl({"a": 1}, 30)], [g], doc=1, params=P, next_id=1)
    assert res.events == [] and len(res.upserts) == 1


def test_global_absorbs_until_no_more_matches():
    g = cl({"a": 1.0}, 10, added=0, id=0)
    # l2 only matches after l1 has pulled g towards "c": {a: .595, c: .405}
    l1 = cl({"a": 0.55, "c": 0.45}, 90)
    l2 = cl({"c": 1.0}, 50)
    assert cosine(g.weights, l2.weights) < 0.5
    res = global_merge([l2, l1], [g], doc=1, params=P, next_id=1)
    assert len(res.clusters) == 1
    assert res.clusters[0].total_tweets == 150


def test_eviction_after_inactivity():
    g = cl({"a": 1}, 40, added=0, id=0, last_active_doc=0)
    clusters = [g]
    for doc in (1, 2):
        res = global_merge([], clusters, doc, P, 1)
        clusters = res.clusters
        assert [c.id for c in clusters] == [0]
    res = global_merge([], clusters, 3, P, 1)
    assert res.clusters == [] and res.deletes == [0]


def test_new_globals_pruned_with_fresh_rule():
    res = global_merge([cl({"a": 0.97, "b": 0.03}, 40)], [], doc=0, params=P, next_id=0)
    assert res.clusters[0].weights == {"a": 1.0}


@pytest.mark.parametrize("added,total_,rate", [(6, 10, 0.6), (0, 10, 0.0), (10, 10, 1.0)])
def test_growth_rate(added, total_, rate):
    assert growth_rate(added, total_) == rate


def test_growth_rate_undefined():
    with pytest.raises(ValueError):
        growth_rate(0, 0)


def test_cluster_event_record_roundtrip():
    e = ClusterEvent(3, 5, 0.75, (("a", 0.5), ("b", 0.5)), 80)
    assert ClusterEvent.from_record(e.to_record()) == e


# -- invariants over random operation sequences ------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_random_operation_invariants(seed):
    random_cluster_walk(seed, 3000)


# -- streaming pipeline ----------------------------------------------------------------

START = 1464652800


def topic_corpus(seed=0, docs=6, background=40, schedule=None):
    rng = random.Random(seed)
    vocab = [f"bg{i}x" for i in range(500)]
    schedule = schedule or {2: 35, 3: 60, 4: 10}
    tweets = []
    for d in range(docs):
        texts = [" ".join(rng.sample(vocab, 6)) for _ in range(background)]
        texts += [" ".join(["quake", "tremor", "shake", "coast"] + rng.sample(vocab, 2))
                  for _ in range(schedule.get(d, 0))]
        rng.shuffle(texts)
        for i, text in enumerate(texts):
            tweets.append(RawTweet(f"{d}-{i}", START + d * 360 + i * 300 // len(texts), text))
    return tweets


def test_pipeline_detects_growing_topic_once():
    run = run_clustering(topic_corpus(), MemoryStore())
    assert len(run.events) == 1
    e = run.events[0]
    assert e.doc == 3 and e.growth_rate > 0.5
    assert {"quak", "tremor", "shake", "coast"} <= {t for t, _ in e.top_terms}


def test_pipeline_matches_sequential_replay():
    tweets = topic_corpus(seed=4, schedule={1: 40, 2: 90, 3: 5, 5: 45})
    run = run_clustering(tweets, MemoryStore(), tasks=3)
    assert run.events == sequential_clustering(tweets, tasks=3)


def test_one_store_round_trip_per_document():
    store = MemoryStore()
    run = run_clustering(topic_corpus(docs=7), store)
    assert store.commits == store.loads == run.report.documents == 7


def test_skipped_tweets_counted():
    tweets = [RawTweet("1", START, "I am at home"), RawTweet("2", START + 1, "the and of"),
              RawTweet("3", START + 2, "real words here")]
    assert run_clustering(tweets, MemoryStore()).skipped_tweets == 2


def test_sleep_mode_and_shuffle_run():
    run = run_clustering(topic_corpus(), MemoryStore(), mode=BarrierMode.sleep(1), grouping="shuffle", seed=None)
    assert run.report.documents == 6
