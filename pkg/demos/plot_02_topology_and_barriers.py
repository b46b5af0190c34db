"""
Spouts, bolts and the end-of-document barrier
=============================================

The runtime wires a spout to bolts running as parallel threads. Tuples
belonging to one time window must not mix with the next window inside a
bolt. This demo compares the direct barrier with the naive "sleep and hope"
approach by stamping every tuple as it is processed.
"""

import time

from tweetstorm.ingest import EndOfDocument
from tweetstorm.runtime import SPOUT, BarrierMode, Bolt, Grouping, Topology, count_interleavings, run


def stream(docs=2, per_doc=4):
    for d in range(docs):
        for i in range(per_doc):
            yield (f"tuple {i}", d)
        yield EndOfDocument(d)


class SlowOnTaskZero(Bolt):
    """Task 0 takes 50 ms per tuple; the others are instant."""

    def process(self, tup, collector):
        if self.context.task == 0:
            time.sleep(0.05)


def topology():
    return Topology(stream()).add_bolt("work", SlowOnTaskZero, 2, {SPOUT: Grouping.direct()})


# %%
# With the direct barrier the spout waits until every task has finished the
# window before it releases the next one.
hits = sum(count_interleavings(run(topology(), BarrierMode.direct(), trace=True).trace) > 0 for _ in range(20))
print(f"direct barrier: {hits}/20 runs interleaved")

# %%
# Sleeping for a fixed time instead gives no guarantee. With no sleep at all
# the fast task races ahead into the next window while task 0 is still busy.
hits = sum(count_interleavings(run(topology(), BarrierMode.sleep(0), trace=True).trace) > 0 for _ in range(20))
print(f"sleep(0):       {hits}/20 runs interleaved")

# %%
# The run report also records throughput and queue pressure.
report = run(topology(), BarrierMode.direct())
print(report.tuples_per_document, report.processed, report.queue_high_water)
