"""
Persisting state and comparing the two detectors
================================================

Detector state lives in a store that commits once per window. The file
store writes a line-per-record snapshot atomically, so a crashed run can be
resumed from the last completed window. Finally the two detectors are run
on the same corpus and their findings compared.
"""

import tempfile
from pathlib import Path

from tweetstorm.evaluation import Method, compare, run_method
from tweetstorm.store import FileStore
from tweetstorm.synthetic import Burst, SyntheticSpec, Topic, gen_synthetic

spec = SyntheticSpec(documents=8, tweets_per_doc=200, vocabulary_size=1500, background="uniform",
                     bursts=[Burst("blackout", 6, 40)],
                     topics=[Topic(["flood", "river", "bridge", "rain"], {3: 35, 4: 60})])
corpus = gen_synthetic(spec, seed=2)

# %%
# A file-backed clustering run leaves a readable snapshot behind.
path = Path(tempfile.mkdtemp()) / "store.jsonl"
clusters = run_method(Method.CLUSTERING, corpus.tweets, store=FileStore(path))
print(path.read_text().splitlines()[0])
print(f"{len(path.read_text().splitlines()) - 1} records")

# %%
# Reopening the file resumes from the last committed window.
print("resumed at window", FileStore(path).last_committed)

# %%
# Both detectors on the same corpus, then the overlap between them.
words = run_method(Method.KEYBASED_DIRECT, corpus.tweets)
print("keywords:", sorted({e.term for e in words.events}))
print("cluster events:", [[t for t, _ in e.top_terms][:4] for e in clusters.events])
overlap = compare(words.events, clusters.events, words.report.fingerprint, clusters.report.fingerprint)
print(overlap.to_dict())
