"""
Finding bursting words
======================

The key-based detector scores every common word with tf-idf in each time
window and flags words whose score at least doubled compared with the
previous window. Here we plant a burst of "earthquake" in a synthetic
stream and watch it come out.
"""

import tempfile
from pathlib import Path

from tweetstorm.keybased import KeyParams, run_keybased, write_charts
from tweetstorm.runtime import BarrierMode
from tweetstorm.store import MemoryStore
from tweetstorm.synthetic import Burst, SyntheticSpec, gen_synthetic

spec = SyntheticSpec(documents=10, tweets_per_doc=150, vocabulary_size=300, noise=0.2,
                     bursts=[Burst("earthquake", 7, 40)])
corpus = gen_synthetic(spec, seed=1)
print(f"{len(corpus.tweets)} tweets, planted: {corpus.truth}")

# %%
# Run the detector. The store keeps a ten-point tf-idf history per word.
store = MemoryStore()
result = run_keybased(corpus.tweets, store, KeyParams(tfidf_event_rate=2.0, common_word_threshold=10),
                      mode=BarrierMode.direct(), tasks=4)
for e in result.events:
    print(f"doc {e.doc}: {e.term!r} rate {e.increment_rate}")

# %%
# Each event can be exported as chart data, one CSV per word and window.
out = Path(tempfile.mkdtemp())
write_charts(result.events, out)
for path in sorted(out.iterdir()):
    print(path.name)
    print(path.read_text())
