import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from provsumm.oracle import exact_topk
from provsumm.patterns import DerivationPattern, PatternCandidate, estimate_completeness, \
    generate_candidates, pattern_matches
from provsumm.sampler import SampleConfig, sample
from provsumm.synthetic import small_instance
from provsumm.topk import (
    better,
    best_first_topk,
    canonical_order,
    cp_bounds,
    disjoint,
    generalizes,
    harmonic,
    is_generalized_by,
    naive_cp_bounds,
    score_bounds,
    union_count,
)

F, T = False, True


def pat(*args, ann=(F, F), rule="r"):
    return DerivationPattern(rule, tuple(args), ann)


P = pat(2, None)
P1 = pat(3, None)
P2 = pat(2, 1)


def cand(p, hundredths, info, mask=None):
    return PatternCandidate(p, hundredths, 100, info, mask)


def trio(infos=(0.5, 0.5, 1.0)):
    return [cand(P, 44, infos[0]), cand(P1, 55, infos[1]), cand(P2, 10, infos[2])]


def test_generalizes_example():
    assert generalizes(pat(None, None, "a"), pat(None, "b", "a"))
    assert is_generalized_by(pat(None, "b", "a"), pat(None, None, "a"))
    assert not generalizes(pat(None, "b", "a"), pat(None, None, "a"))


def test_generalizes_reflexive_and_annotations():
    assert generalizes(P, P)
    assert not generalizes(P, pat(2, None, ann=(T, F)))


@pytest.mark.parametrize("a,b,expected", [
    (P, P1, True),
    (P, P2, False),
    (P, pat(2, None, ann=(T, F)), True),
    (P, pat(2, None, rule="r2"), True),
])
def test_disjoint_examples(a, b, expected):
    assert disjoint(a, b) is expected
    assert disjoint(b, a) is expected


def test_trio_relations():
    assert disjoint(P, P1) and disjoint(P1, P2)
    assert is_generalized_by(P2, P)


def test_cp_bounds_trio_exact():
    members = [(P, Fraction(44, 100), 0), (P1, Fraction(55, 100), 0), (P2, Fraction(10, 100), 0)]
    assert cp_bounds(members) == (Fraction(99, 100), Fraction(99, 100))
    assert cp_bounds(trio()) == (Fraction(99, 100), Fraction(99, 100))


def test_cp_bounds_fallbacks():
    assert naive_cp_bounds(trio()) == (Fraction(55, 100), 1)
    assert cp_bounds([cand(P, 44, 0)]) == (Fraction(44, 100), Fraction(44, 100))
    a, b = pat(1, None), pat(None, 2)
    assert cp_bounds([cand(a, 40, 0), cand(b, 40, 0)]) == (Fraction(2, 5), Fraction(4, 5))


def test_cp_bounds_duplicates_and_pairs():
    assert cp_bounds([cand(P, 44, 0), cand(P, 44, 0)]) == (Fraction(44, 100), Fraction(44, 100))
    assert cp_bounds([cand(P, 44, 0), cand(P2, 10, 0)]) == (Fraction(44, 100), Fraction(44, 100))
    assert cp_bounds([cand(P1, 55, 0), cand(P2, 10, 0)]) == (Fraction(65, 100), Fraction(65, 100))


def test_cp_bounds_greedy_above_limit():
    members = [cand(pat(i, None), 5, 0) for i in range(12)]
    assert cp_bounds(members) == (Fraction(60, 100), Fraction(60, 100))
    assert cp_bounds(members, exact_limit=3) == cp_bounds(members)


@pytest.mark.parametrize("cp,info,expected", [
    (0.5, 0.5, 0.5),
    (0.9, 0.0, 0.0),
    (0.0, 0.0, 0.0),
    (Fraction(99, 100), Fraction(2, 3), Fraction(2 * 99 * 2, 3 * 100) / (Fraction(99, 100) + Fraction(2, 3))),
])
def test_harmonic(cp, info, expected):
    assert harmonic(cp, info) == expected


def test_score_bounds_trio():
    members = [(P, Fraction(44, 100), Fraction(1, 2)), (P1, Fraction(55, 100), Fraction(1, 2)),
               (P2, Fraction(10, 100), Fraction(1))]
    lb, ub = score_bounds(members, 3)
    assert lb == ub
    assert float(lb) == pytest.approx(0.7968, abs=1e-4)
    assert float(lb) == pytest.approx(2 * 0.99 * (2 / 3) / (0.99 + 2 / 3))


def test_score_bounds_incomplete():
    lb, ub = score_bounds([cand(P, 44, 0.5)], 2, remaining=[cand(P1, 55, 1.0)])
    assert lb == pytest.approx(harmonic(0.44, 0.5))
    assert ub >= harmonic(0.99, 0.75) - 1e-12


@pytest.mark.parametrize("infos,expected", [
    ((0.5, 0.5, 1.0), {P1, P2}),
    ((0.5, 0.5, 0.5), {P, P1}),
])
def test_best_first_trio(infos, expected):
    cands = trio(infos)
    res = best_first_topk(cands, 2)
    assert {c.pattern for c in res.patterns} == expected
    scores = {}
    for pair in itertools.combinations(range(3), 2):
        lb, ub = cp_bounds([cands[i] for i in pair])
        assert lb == ub
        scores[pair] = harmonic(float(lb), sum(infos[i] for i in pair) / 2)
    assert res.score == pytest.approx(max(scores.values()))
    assert res.exact
    assert [c.cp for c in res.patterns] == sorted((c.cp for c in res.patterns), reverse=True)


def test_trio_pair_scores():
    """{p,p''} collapses to cp 0.44 and {p',p''} stays at cp 0.65."""
    c = trio()
    assert cp_bounds([c[0], c[2]]) == (Fraction(44, 100),) * 2
    assert harmonic(0.65, 0.75) == pytest.approx(0.6964, abs=1e-4)
    assert harmonic(0.99, 0.5) == pytest.approx(0.6644, abs=1e-4)


def test_k1_is_scan():
    cands = trio()
    res = best_first_topk(cands, 1)
    best = max(cands, key=lambda c: harmonic(c.cp, c.info))
    assert res.patterns == [best]


def test_better_tie_rule():
    assert better(0.5, (0, 2), 0.5 + 1e-14, (1,))
    assert not better(0.5, (1,), 0.5, (0, 2))
    assert better(0.6, (5,), 0.5, (0,))


def test_canonical_order():
    cands = [cand(P2, 10, 0), cand(P, 44, 0), cand(P1, 44, 0)]
    assert canonical_order(cands) == [1, 2, 0]


def test_union_count():
    assert union_count([0b101, 0b011]) == 3
    assert union_count([]) == 0


def test_zero_cp_candidates_are_ignored():
    res = best_first_topk([PatternCandidate(P, 0, 10, 1.0, 0)], 2)
    assert res.patterns == []


def test_k_zero_rejected():
    with pytest.raises(ValueError):
        best_first_topk(trio(), 0)


def _instance_candidates(seed, size=12):
    inst = small_instance(seed)
    try:
        s = sample(inst.query, inst.db, inst.question, SampleConfig(size, rng_seed=seed))
    except Exception:
        return None, None
    cands = estimate_completeness(generate_candidates(s), s)
    return s, cands


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_order_relations_against_matches(seed):
    s, cands = _instance_candidates(seed)
    if s is None:
        return
    derivs = s.derivations()
    pats = [c.pattern for c in cands][:30]
    for a, b in itertools.product(pats, repeat=2):
        ma = {i for i, d in enumerate(derivs) if pattern_matches(a, d)}
        mb = {i for i, d in enumerate(derivs) if pattern_matches(b, d)}
        if is_generalized_by(a, b):
            assert ma <= mb
            assert not disjoint(a, b)
        if disjoint(a, b):
            assert not ma & mb
        assert disjoint(a, b) == disjoint(b, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_cp_bounds_contain_union(seed, size):
    s, cands = _instance_candidates(seed)
    if s is None:
        return
    for combo in itertools.islice(itertools.combinations(cands, min(size, len(cands))), 40):
        lb, ub = cp_bounds(combo)
        exact = Fraction(union_count([c.match_mask for c in combo]), combo[0].sample_size)
        assert lb <= exact <= ub
        assert max(c.cp_estimate for c in combo) <= ub <= min(1, sum(c.cp_estimate for c in combo))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_best_first_equals_exhaustive(seed, k):
    s, cands = _instance_candidates(seed, size=8)
    if s is None:
        return
    cands = cands[:12]
    got = best_first_topk(cands, k)
    want = exact_topk(cands, k)
    assert got.exact
    assert got.score == pytest.approx(want.score, abs=1e-12)
    assert got.indices == want.indices


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_bounds_mode_is_sound(seed, k):
    s, cands = _instance_candidates(seed, size=8)
    if s is None:
        return
    cands = cands[:12]
    got = best_first_topk(cands, k, use_masks=False)
    want = exact_topk(cands, k)
    assert len(got.patterns) <= k
    exact = union_count([c.match_mask for c in got.patterns]) / cands[0].sample_size
    assert got.cp_lb - 1e-12 <= exact <= got.cp_ub + 1e-12
    if got.exact:
        assert got.score_lb >= want.score - 1e-9
