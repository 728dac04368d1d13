"""
Sampling a derivation space of 10^36
====================================

An 8-way chain join over permutation relations of 10^4 rows.  Enumeration
is hopeless; sampling cost grows with the batch size only.
"""

import time

import numpy as np

from provsumm.pipeline import Inputs, summarize
from provsumm.relstore import DomainOverrides
from provsumm.sampler import SampleConfig, SamplingPlan
from provsumm.synthetic import chain_instance

inst = chain_instance(length=8, domain=10_000)
print(inst.query)

t0 = time.perf_counter()
s = summarize(Inputs(inst.query, inst.db, inst.question, DomainOverrides()), k=3, sample_size=1000)
print(f"space {s.total_space:.3e}, {len(s.candidates)} candidates, "
      f"score {s.result.score:.3f}, {time.perf_counter() - t0:.1f}s")
print({k: round(v, 3) for k, v in s.timing.items()})

# sampler time per batch size
plan = SamplingPlan(inst.query, inst.db, inst.question, SampleConfig(1000)).plans[0]
sizes = np.array([1000, 2000, 4000, 8000, 16000])
times = []
for n in sizes:
    t = time.perf_counter()
    plan.derive(plan.draw_indices(int(n), 0, 0), keep_existing=False)
    times.append(time.perf_counter() - t)
slope, intercept = np.polyfit(sizes, times, 1)
print("seconds:", np.round(times, 4))
print(f"about {slope * 1e6:.2f} us per drawn row")
