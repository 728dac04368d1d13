"""
Why-not provenance of a small recursive-looking query
=====================================================

Q(X,Y) :- R(X,Z), R(Z,Y), X < Y over a six-row relation.  We ask why no
answer of the form Q(X,4) other than Q(1,4) exists, look at the complete
why-not provenance, and compare a sampled summary with the exact one.
"""

from provsumm import parse_question, evaluate
from provsumm.fixtures import load_fixture
from provsumm.oracle import enumerate_whynot, exact_topk
from provsumm.patterns import estimate_completeness, generate_candidates
from provsumm.sampler import SampleConfig, sample
from provsumm.topk import best_first_topk

fx = load_fixture("running_example")
print("answers:", sorted(evaluate(fx.query, fx.db).rows))

# every failed derivation of every missing Q(X,4); domains come from domains.txt
question = parse_question("WHYNOT Q(X,4)")
full = enumerate_whynot(fx.query, fx.db, question.ptuple, fx.overrides)
print(f"{len(full)} of {full.total_space} valuations are why-not derivations")
for d in full.derivations:
    print("  ", d)

# exact summary: candidates from all derivations, exhaustive search
cands = estimate_completeness(generate_candidates(full.derivations), full.derivations, question.ptuple)
best = exact_topk(cands, 2)
print(f"\nexact top-2 (score {best.score:.3f}):")
for c in best.patterns:
    print(f"   {c.pattern}  cp={c.cp:.3f} info={c.info:.2f}")

# sampled summary from 6 derivations
s = sample(fx.query, fx.db, question, SampleConfig(6, rng_seed=3), fx.overrides)
print(f"\nsample of {s.achieved_size} (batch {s.oversample_size_used}, p_prov {s.p_prov_estimate:.3f}):")
for d in s.derivations():
    print("  ", d)
est = best_first_topk(estimate_completeness(generate_candidates(s), s), 2)
print(f"sampled top-2 (score {est.score:.3f}):")
for c in est.patterns:
    print(f"   {c.pattern}  cp~{c.cp:.3f} info={c.info:.2f}")
