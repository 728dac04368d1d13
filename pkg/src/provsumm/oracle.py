"""Brute-force reference implementations for small instances.

Nothing here shares code with the sampler's vectorised paths: provenance is
enumerated as the full cross product of the domains, matching is a plain
loop, and top-k tries every subset.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .datalog import (
    ProvenanceQuestion,
    PTuple,
    Query,
    QuestionType,
    Var,
    matches_ptuple,
    unify_query,
)
from .patterns import DerivationPattern, PatternCandidate
from .relstore import (
    Database,
    DomainOverrides,
    EmptyDomainError,
    evaluate,
    goal_holds,
    rule_domains,
    successful_valuations,
    value_key,
)
from .sampler import AnnotatedDerivation, SampleSet
from .topk import (
    CandidateSet,
    SummaryResult,
    _mean,
    _result,
    better,
    canonical_order,
    harmonic,
)

ENUMERATION_CAP = 10**7
SUBSET_CAP = 2_000_000


class OracleError(ValueError):
    code = "oracle_limit"


@dataclass
class FullProvenance:
    derivations: list[AnnotatedDerivation]
    question: ProvenanceQuestion
    total_space: int
    per_rule_space: dict[str, int]

    def __len__(self) -> int:
        return len(self.derivations)

    def as_sample(self, rules=None) -> SampleSet:
        """View the full provenance as a sample (every derivation once)."""
        per_rule: dict[str, list[AnnotatedDerivation]] = {}
        for d in self.derivations:
            per_rule.setdefault(d.rule_id, []).append(d)
        if rules is None:
            rules = []
        return SampleSet(self.question, list(rules), per_rule, None, 0)


def _sort_key(d: AnnotatedDerivation) -> tuple:
    return (d.rule_id, tuple(value_key(a) for a in d.args), d.goal_annotations)


def enumerate_whynot(query: Query, db: Database, pt: PTuple,
                     overrides: DomainOverrides | None = None,
                     cap: int = ENUMERATION_CAP) -> FullProvenance:
    """Every failed derivation of every missing answer matching ``pt``."""
    existing = {t for t in evaluate(query, db).rows if matches_ptuple(t, pt)}
    out = []
    spaces: dict[str, int] = {}
    for rule in unify_query(query, pt):
        try:
            domains = rule_domains(rule, db, overrides)
        except EmptyDomainError:
            continue
        space = math.prod(len(domains[v]) for v in rule.unbound_vars)
        spaces[rule.rule_id] = space
        if space > cap:
            raise OracleError(
                f"rule {rule.rule_id} has {space} valuations, above the enumeration cap "
                f"{cap}; use sampling mode"
            )
        base = rule.base
        for values in itertools.product(*(domains[v].values for v in rule.unbound_vars)):
            nu = dict(zip(rule.unbound_vars, values))
            nu.update(rule.bindings)
            if not all(goal_holds(db, c, nu) for c in base.comparisons):
                continue
            head = tuple(nu[a] if isinstance(a, Var) else a for a in base.head.args)
            if head in existing:
                continue
            ann = tuple(goal_holds(db, g, nu) for g in base.literals)
            out.append(AnnotatedDerivation(rule.rule_id, tuple(nu[v] for v in base.variable_order), ann))
    out.sort(key=_sort_key)
    return FullProvenance(out, ProvenanceQuestion(pt, QuestionType.WHYNOT),
                          sum(spaces.values()), spaces)


def enumerate_why(query: Query, db: Database, pt: PTuple,
                  overrides: DomainOverrides | None = None) -> FullProvenance:
    """Every successful derivation of every answer matching ``pt``."""
    out = set()
    spaces: dict[str, int] = {}
    for rule in unify_query(query, pt):
        try:
            domains = rule_domains(rule, db, overrides)
            spaces[rule.rule_id] = math.prod(len(domains[v]) for v in rule.unbound_vars)
        except EmptyDomainError:
            spaces[rule.rule_id] = 0
        base = rule.base
        for nu in successful_valuations(base, db):
            head = tuple(nu[a] if isinstance(a, Var) else a for a in base.head.args)
            if matches_ptuple(head, pt):
                out.add(AnnotatedDerivation(rule.rule_id, tuple(nu[v] for v in base.variable_order),
                                            (True,) * len(base.literals)))
    return FullProvenance(sorted(out, key=_sort_key), ProvenanceQuestion(pt, QuestionType.WHY),
                          sum(spaces.values()), spaces)


def enumerate_provenance(query: Query, db: Database, question: ProvenanceQuestion,
                         overrides: DomainOverrides | None = None,
                         cap: int = ENUMERATION_CAP) -> FullProvenance:
    if question.qtype is QuestionType.WHY:
        return enumerate_why(query, db, question.ptuple, overrides)
    return enumerate_whynot(query, db, question.ptuple, overrides, cap)


def _matches(p: DerivationPattern, d: AnnotatedDerivation) -> bool:
    if p.rule_id != d.rule_id or tuple(p.goal_annotations) != tuple(d.goal_annotations):
        return False
    for a, b in zip(p.args, d.args, strict=True):
        if a is not None and a != b:
            return False
    return True


def exact_completeness(p: DerivationPattern, full: FullProvenance | Sequence[AnnotatedDerivation]) -> Fraction:
    derivations = full.derivations if isinstance(full, FullProvenance) else list(full)
    if not derivations:
        raise OracleError("completeness is undefined over empty provenance")
    return Fraction(sum(1 for d in derivations if _matches(p, d)), len(derivations))


class CompletenessTable:
    """Exact match counts for many patterns over a large provenance.

    For each set of constant positions seen, counts derivations per
    (rule, annotations, projected values).
    """

    def __init__(self, derivations: Sequence[AnnotatedDerivation]):
        self.derivations = list(derivations)
        self.total = len(self.derivations)
        self._counts: dict[tuple[int, ...], Counter] = {}

    def count(self, p: DerivationPattern) -> int:
        positions = tuple(i for i, a in enumerate(p.args) if a is not None)
        table = self._counts.get(positions)
        if table is None:
            table = Counter(
                (d.rule_id, tuple(d.goal_annotations), tuple(d.args[i] for i in positions))
                for d in self.derivations if len(d.args) > (positions[-1] if positions else -1)
            )
            self._counts[positions] = table
        return table[(p.rule_id, tuple(p.goal_annotations), tuple(p.args[i] for i in positions))]

    def completeness(self, p: DerivationPattern) -> Fraction:
        if self.total == 0:
            raise OracleError("completeness is undefined over empty provenance")
        return Fraction(self.count(p), self.total)


def exact_topk(candidates: Sequence[PatternCandidate], k: int,
               derivations: Sequence[AnnotatedDerivation] | None = None,
               cap: int = SUBSET_CAP) -> SummaryResult:
    """Score every subset of at most ``k`` candidates.

    Set completeness is the size of the union of match sets, taken over
    ``derivations`` when given and from the candidates' match masks
    otherwise.  Ties are broken as in the best-first search.
    """
    order = [i for i in canonical_order(candidates) if candidates[i].match_count > 0]
    cands = [candidates[i] for i in order]
    n = len(cands)
    if n == 0:
        return SummaryResult([], 0.0, 0.0, 0.0, 0.0, 0.0, True, (), 0, "exhaustive")
    subsets = sum(math.comb(n, j) for j in range(1, min(k, n) + 1))
    if subsets > cap:
        raise OracleError(f"{subsets} subsets exceed the exhaustive search cap {cap}")
    if derivations is not None:
        total = len(derivations)
        sets = [frozenset(i for i, d in enumerate(derivations) if _matches(c.pattern, d))
                for c in cands]
    else:
        total = cands[0].sample_size
        sets = []
        for c in cands:
            if c.match_mask is None:
                raise OracleError("candidates lack match masks and no derivations were given")
            sets.append(frozenset(i for i in range(total) if c.match_mask >> i & 1))
    best = None
    for size in range(1, min(k, n) + 1):
        for key in itertools.combinations(range(n), size):
            covered = frozenset().union(*(sets[i] for i in key))
            cp = len(covered) / total
            info = _mean([cands[i].info for i in key])
            sc = harmonic(cp, info)
            if best is None or better(sc, key, best.score_lb, best.members):
                best = CandidateSet(key, cp, cp, info, sc, sc, sc, size == k)
    return _result(cands, order, best, True, subsets, "exhaustive")
