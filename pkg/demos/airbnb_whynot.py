"""
Why are there no shared rooms?
==============================

Listings in Queen Anne available on 2016-11-09.  None of them is a shared
room; the why-not summary shows which goals fail and for which listings.
"""

from provsumm import parse_question, evaluate
from provsumm.fixtures import load_fixture
from provsumm.pipeline import Inputs, build_report, report_to_text, summarize
from provsumm.relstore import attribute_distinct_counts

fx = load_fixture("airbnb")
print("answers:", sorted(evaluate(fx.query, fx.db).rows))
print("distinct values per attribute:", attribute_distinct_counts(fx.db))

inputs = Inputs(fx.query, fx.db, parse_question("WHYNOT AL(N,'shared')"), fx.overrides)

# exact: enumerate all 2160 valuations
full = summarize(inputs, k=3, mode="full")
print(report_to_text(build_report(full, mode="full", k=3)))

# sampled: 40 derivations are enough to find the dominant patterns
for seed in (0, 1):
    s = summarize(inputs, k=3, sample_size=40, seed=seed)
    print(report_to_text(build_report(s, mode="sample", seed=seed, k=3, sample_size=40)))
