"""
Growing clusters of similar tweets
==================================

The clustering detector groups near-duplicate tweets inside each window,
merges those groups into long-lived clusters and raises an event when a
cluster suddenly gains more than half of its tweets in a single window.
"""

from tweetstorm.clustering import Cluster, ClusterParams, cosine, global_merge, run_clustering
from tweetstorm.store import MemoryStore
from tweetstorm.synthetic import SyntheticSpec, Topic, gen_synthetic

# %%
# Similarity between sparse tweet vectors is plain cosine.
print(cosine({"a": 1.0}, {"a": 0.5, "b": 0.5}))

# %%
# Growth in one step: a stored cluster of 40 tweets absorbs 60 more.
stored = Cluster({"quak": 1.0}, 40, 0, created_doc=0, last_active_doc=0, id=0)
fresh = Cluster({"quak": 1.0}, 60, 60, created_doc=1, last_active_doc=1)
print(global_merge([fresh], [stored], doc=1, params=ClusterParams(), next_id=1).events)

# %%
# End to end: a topic builds up over two windows amid random chatter.
topic = ["earthquake", "tremor", "magnitude", "coastline"]
spec = SyntheticSpec(documents=7, tweets_per_doc=200, vocabulary_size=2000, background="uniform",
                     topics=[Topic(topic, {2: 35, 3: 60, 4: 10})])
corpus = gen_synthetic(spec, seed=5)
store = MemoryStore()
result = run_clustering(corpus.tweets, store, tasks=4)
for e in result.events:
    print(f"doc {e.doc}: cluster {e.cluster_id} grew {e.growth_rate:.0%} to {e.total_tweets} tweets")
    print("   ", [t for t, _ in e.top_terms])

# %%
# The detector touched the store once per window, no matter how many tweets.
print(f"{store.commits} commits for {result.report.documents} windows and {len(corpus.tweets)} tweets")
