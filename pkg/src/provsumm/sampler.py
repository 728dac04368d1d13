"""Sampling annotated derivations from why and why-not provenance.

Why-not provenance is never materialized.  For each unified rule we draw
every unbound variable independently from its domain, zip the columns into
candidate valuations, drop those violating variable-to-variable comparisons
or heading an existing answer, annotate the goals and deduplicate.  The
batch size is chosen so that enough derivations survive with the requested
probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .datalog import (
    Comparator,
    Constant,
    ProvenanceQuestion,
    PTuple,
    Query,
    QuestionType,
    Rule,
    UnifiedRule,
    Var,
    format_constant,
    matches_ptuple,
    unify_query,
)
from .relstore import (
    Database,
    DomainOverrides,
    EmptyDomainError,
    VarDomain,
    evaluate,
    rule_domains,
    successful_valuations,
    value_key,
)

ORDER_SELECTIVITY = 0.5
NE_SELECTIVITY = 1.0


class SamplingError(ValueError):
    code = "sampling_error"


class OversampleLimitError(SamplingError):
    code = "oversample_limit"


class EmptyProvenanceError(SamplingError):
    code = "empty_provenance"


@dataclass(frozen=True)
class AnnotatedDerivation:
    """Constants for a rule's variables (in ``variable_order``) plus one
    success flag per literal goal in body order."""

    rule_id: str
    args: tuple
    goal_annotations: tuple[bool, ...]

    def __str__(self) -> str:
        args = ",".join(format_constant(a) for a in self.args)
        ann = ",".join("T" if g else "F" for g in self.goal_annotations)
        return f"{self.rule_id}({args})-({ann})"


@dataclass(frozen=True)
class SampleConfig:
    target_size: int
    success_prob: float = 0.999
    rng_seed: int = 0
    max_oversample: int = 50_000_000
    retry_limit: int = 8
    max_selectivity_multiplier: float = 64.0

    def __post_init__(self):
        if self.target_size < 1:
            raise SamplingError("sample size must be at least 1")
        if not 0.0 < self.success_prob < 1.0:
            raise SamplingError("success probability must lie strictly between 0 and 1")
        if self.retry_limit < 0:
            raise SamplingError("retry limit must be non-negative")


@dataclass
class RuleSampleStats:
    rule_id: str
    total_space: int
    existing_derivations: int
    p_prov: float
    selectivity_multiplier: float
    quota: int
    oversample_size: int = 0
    drawn: int = 0
    attempts: int = 0
    survivors: int = 0


@dataclass
class SampleSet:
    question: ProvenanceQuestion
    rules: list[UnifiedRule]
    per_rule: dict[str, list[AnnotatedDerivation]]
    p_prov_estimate: float | None
    oversample_size_used: int
    stats: list[RuleSampleStats] = field(default_factory=list)
    shortfall: bool = False

    @property
    def achieved_size(self) -> int:
        return sum(len(v) for v in self.per_rule.values())

    def derivations(self) -> list[AnnotatedDerivation]:
        """All derivations, rule by rule in query order."""
        out = []
        for r in self.rules:
            out.extend(self.per_rule.get(r.rule_id, ()))
        return out

    def __len__(self) -> int:
        return self.achieved_size


# --------------------------------------------------------------------------
# sizing


def count_derivation_space(rule: UnifiedRule, domains: dict[Var, VarDomain]) -> int:
    """Product of the unbound variables' domain sizes (exact integer)."""
    return math.prod(len(domains[v]) for v in rule.unbound_vars)


def _head_positions(rule: UnifiedRule) -> dict[Var, list[int]]:
    out: dict[Var, list[int]] = {}
    for i, a in enumerate(rule.base.head.args):
        if isinstance(a, Var):
            out.setdefault(a, []).append(i)
    return out


def existing_derivation_count(rule: UnifiedRule, domains: dict[Var, VarDomain],
                              existing: Sequence[tuple]) -> int:
    """Valuations in the rule's space whose head is one of ``existing``.

    Each head fixes the head variables, so it accounts for the product of
    the domain sizes of the unbound non-head variables, provided its values
    lie in the head variables' domains.
    """
    head_pos = _head_positions(rule)
    free_head = [v for v in rule.unbound_vars if v in head_pos]
    per_head = math.prod(len(domains[v]) for v in rule.unbound_vars if v not in head_pos)
    dom_sets = {v: set(domains[v].values) for v in free_head}
    head = rule.base.head.args
    total = 0
    for t in existing:
        ok = True
        for i, a in enumerate(head):
            if not isinstance(a, Var):
                ok = a == t[i]
            elif a in rule.bindings:
                ok = rule.bindings[a] == t[i]
            else:
                ok = t[i] in dom_sets[a] and all(t[j] == t[i] for j in head_pos[a])
            if not ok:
                break
        if ok:
            total += per_head
    return total


def estimate_p_prov(rule: UnifiedRule, domains: dict[Var, VarDomain],
                    existing: Sequence[tuple]) -> Fraction:
    """Fraction of the rule's derivation space heading a missing answer."""
    space = count_derivation_space(rule, domains)
    if space == 0:
        raise SamplingError(f"rule {rule.rule_id} has an empty derivation space")
    return 1 - Fraction(existing_derivation_count(rule, domains, existing), space)


def required_oversample_size(p_prov: float, target: int, success_prob: float,
                             cap: int = 50_000_000) -> int:
    """Smallest N >= target with P(Binomial(N, p_prov) >= target) >= success_prob.

    The tail probability grows with N, so an exponential search followed by
    bisection finds the same N as scanning upward one step at a time.
    """
    p = float(p_prov)
    if not 0.0 < p <= 1.0:
        raise SamplingError(f"p_prov must lie in (0, 1], got {p_prov}")
    if target < 1:
        raise SamplingError("target sample size must be at least 1")
    if p == 1.0:
        return target

    def enough(n: int) -> bool:
        return binom.sf(target - 1, n, p) >= success_prob

    lo, hi = target - 1, target
    while not enough(hi):
        lo, hi = hi, hi * 2
        if lo > cap:
            raise OversampleLimitError(
                f"over-sampling size exceeds {cap}; the fraction of derivations that "
                f"survive filtering ({p:.3g}) is too small. Use a smaller sample size "
                "or a lower success probability"
            )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if enough(mid):
            hi = mid
        else:
            lo = mid
    if hi > cap:
        raise OversampleLimitError(f"over-sampling size {hi} exceeds the cap {cap}")
    return hi


def selectivity_compensation(rule: Rule | UnifiedRule, cap: float = 64.0) -> float:
    """Multiplier on N_os for comparisons between two variables."""
    mult = 1.0
    for c in rule.comparisons:
        if isinstance(c.left, Var) and isinstance(c.right, Var):
            sel = NE_SELECTIVITY if c.op is Comparator.NE else ORDER_SELECTIVITY
            mult /= sel
    return min(mult, cap)


# --------------------------------------------------------------------------
# per-rule compiled plan


def _column_rng(seed: int, *salt: int) -> np.random.Generator:
    # one independent stream per (rule, attempt, variable)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=salt)))


class _RulePlan:
    """Precomputed lookups that turn index rows into annotated derivations."""

    def __init__(self, index: int, rule: UnifiedRule, domains: dict[Var, VarDomain],
                 db: Database | None, existing: set[tuple]):
        self.index = index
        self.rule = rule
        self.domains = domains
        self.db = db
        self.existing = existing
        self.unbound = rule.unbound_vars
        self.sizes = [len(domains[v]) for v in self.unbound]
        self.values = [list(domains[v].values) for v in self.unbound]
        upos = {v: j for j, v in enumerate(self.unbound)}
        # full args: position -> index into unbound row, or constant
        self.full_spec = [(True, upos[v]) if v in upos else (False, rule.bindings[v])
                          for v in rule.variable_order]
        vpos = {v: i for i, v in enumerate(rule.variable_order)}

        def template(args):
            return [(True, vpos[a]) if isinstance(a, Var) else (False, a) for a in args]

        self.head_spec = template(rule.base.head.args)
        self.literal_specs = [] if db is None else [
            (db[g.relation].rows, template(g.args), g.negated) for g in rule.base.literals
        ]
        self.var_var = [c for c in rule.comparisons if c.is_var_var]
        self._ranks = self._comparison_ranks()

    def _comparison_ranks(self) -> dict[Var, np.ndarray]:
        # comparisons between variables are evaluated on ranks in a shared
        # sorted universe, which preserves the order of same-typed values
        involved = {v for c in self.var_var for v in (c.left, c.right)}
        if not involved:
            return {}
        universe = sorted({x for v in involved for x in self.domains[v].values}, key=value_key)
        rank = {x: i for i, x in enumerate(universe)}
        return {v: np.array([rank[x] for x in self.domains[v].values], dtype=np.int64)
                for v in involved}

    def draw_indices(self, n: int, seed: int, attempt: int) -> np.ndarray:
        cols = [
            _column_rng(seed, self.index, attempt, j).integers(0, size, n, dtype=np.int64)
            for j, size in enumerate(self.sizes)
        ]
        if not cols:
            return np.zeros((n, 0), dtype=np.int64)
        return np.stack(cols, axis=1)

    def comparison_mask(self, idx: np.ndarray) -> np.ndarray:
        keep = np.ones(len(idx), dtype=bool)
        upos = {v: j for j, v in enumerate(self.unbound)}
        for c in self.var_var:
            left = self._ranks[c.left][idx[:, upos[c.left]]]
            right = self._ranks[c.right][idx[:, upos[c.right]]]
            keep &= c.op.func(left, right)
        return keep

    def full_args(self, idx_row) -> tuple:
        return tuple(self.values[j][idx_row[j]] if is_u else j
                     for is_u, j in self.full_spec)

    def head(self, full: tuple) -> tuple:
        return tuple(full[j] if is_v else j for is_v, j in self.head_spec)

    def annotate(self, full: tuple) -> tuple[bool, ...]:
        out = []
        for rows, spec, negated in self.literal_specs:
            present = tuple(full[j] if is_v else j for is_v, j in spec) in rows
            out.append(present != negated)
        return tuple(out)

    def derive(self, idx: np.ndarray, keep_existing: bool) -> list[AnnotatedDerivation]:
        """Filter, annotate and deduplicate a batch of drawn index rows."""
        idx = idx[self.comparison_mask(idx)]
        seen: dict[AnnotatedDerivation, None] = {}
        rid = self.rule.rule_id
        for row in idx.tolist():
            full = self.full_args(row)
            if (self.head(full) in self.existing) != keep_existing:
                continue
            seen.setdefault(AnnotatedDerivation(rid, full, self.annotate(full)), None)
        return list(seen)


# --------------------------------------------------------------------------
# public step-wise operations


def draw_bindings(rule: UnifiedRule, domains: dict[Var, VarDomain], n_os: int,
                  seed: int = 0, rule_index: int = 0, attempt: int = 0) -> list[tuple]:
    """Draw ``n_os`` values per unbound variable with replacement, zip the
    columns and drop rows violating variable-to-variable comparisons.

    Rows hold values for ``rule.unbound_vars`` in order.
    """
    plan = _RulePlan(rule_index, rule, domains, None, set())
    idx = plan.draw_indices(n_os, seed, attempt)
    idx = idx[plan.comparison_mask(idx)]
    return [tuple(plan.values[j][i] for j, i in enumerate(row)) for row in idx.tolist()]


def head_of(rule: UnifiedRule, unbound_values: Sequence[Constant]) -> tuple:
    nu = dict(zip(rule.unbound_vars, unbound_values))
    nu.update(rule.bindings)
    return tuple(nu[a] if isinstance(a, Var) else a for a in rule.base.head.args)


def filter_existing(bindings: Sequence[tuple], rule: UnifiedRule, existing: set[tuple],
                    qtype: QuestionType = QuestionType.WHYNOT) -> list[tuple]:
    """Keep bindings whose head is missing (WHYNOT) or present (WHY)."""
    keep_present = qtype is QuestionType.WHY
    return [b for b in bindings if (head_of(rule, b) in existing) == keep_present]


def annotate_goals(bindings: Sequence[tuple], rule: UnifiedRule,
                   db: Database) -> list[AnnotatedDerivation]:
    """Annotate each literal goal and deduplicate, keeping first occurrences."""
    seen: dict[AnnotatedDerivation, None] = {}
    for b in bindings:
        full = rule.full_args(b)
        nu = dict(zip(rule.variable_order, full))
        ann = []
        for g in rule.base.literals:
            present = db.holds(g.relation, tuple(nu[a] if isinstance(a, Var) else a for a in g.args))
            ann.append(present != g.negated)
        seen.setdefault(AnnotatedDerivation(rule.rule_id, full, tuple(ann)), None)
    return list(seen)


def matching_answers(query: Query, db: Database, pt: PTuple) -> set[tuple]:
    """Existing answers of the query that match the p-tuple."""
    return {t for t in evaluate(query, db).rows if matches_ptuple(t, pt)}


def allocate_quotas(target: int, weights: Sequence[float]) -> list[int]:
    """Split ``target`` proportionally to ``weights`` (largest remainder)."""
    total = math.fsum(weights)
    if total <= 0:
        return [0] * len(weights)
    raw = [target * w / total for w in weights]
    quotas = [int(math.floor(x)) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - quotas[i]), i))
    for i in order[: target - sum(quotas)]:
        quotas[i] += 1
    return quotas


# --------------------------------------------------------------------------
# full sampling pipeline


class SamplingPlan:
    """Everything about a sampling run that does not depend on the seed.

    Preparing evaluates the query, unifies rules, computes domains and the
    per-rule batch sizes once; :meth:`run` then only draws.  ``sample`` is
    a thin wrapper for one-off use.
    """

    def __init__(self, query: Query, db: Database, question: ProvenanceQuestion,
                 config: SampleConfig, overrides: DomainOverrides | None = None,
                 existing: set[tuple] | None = None):
        self.query = query
        self.db = db
        self.question = question
        self.config = config
        pt = question.ptuple
        db.check_query(query)
        self.existing = matching_answers(query, db, pt) if existing is None else existing
        self.rules: list[UnifiedRule] = []
        self.plans: list[_RulePlan] = []
        self.stats: list[RuleSampleStats] = []
        for i, rule in enumerate(unify_query(query, pt)):
            try:
                domains = rule_domains(rule, db, overrides)
            except EmptyDomainError:
                continue
            self.rules.append(rule)
            self.plans.append(_RulePlan(i, rule, domains, db, self.existing))
        if not self.rules:
            raise EmptyProvenanceError(f"no rule can derive tuples matching {pt}")
        if question.qtype is QuestionType.WHYNOT:
            self._size_whynot()
        else:
            self._enumerate_why()

    def _size_whynot(self):
        cfg = self.config
        weights = []
        for plan in self.plans:
            space = count_derivation_space(plan.rule, plan.domains)
            existing = existing_derivation_count(plan.rule, plan.domains, self.existing)
            mult = selectivity_compensation(plan.rule, cfg.max_selectivity_multiplier)
            p = 1 - Fraction(existing, space)
            self.stats.append(RuleSampleStats(plan.rule.rule_id, space, existing, float(p), mult, 0))
            weights.append(float(Fraction(space - existing) / Fraction(mult)))
        if not any(w > 0 for w in weights):
            raise EmptyProvenanceError(
                f"question has empty provenance of requested type: every tuple matching "
                f"{self.question.ptuple} is already an answer"
            )
        for st, q in zip(self.stats, allocate_quotas(cfg.target_size, weights)):
            st.quota = q
            if q > 0:
                n = required_oversample_size(st.p_prov, q, cfg.success_prob, cfg.max_oversample)
                n = int(math.ceil(n * st.selectivity_multiplier))
                if n > cfg.max_oversample:
                    raise OversampleLimitError(
                        f"over-sampling size {n} for rule {st.rule_id} exceeds the cap "
                        f"{cfg.max_oversample}; use a smaller sample size or a lower "
                        "success probability"
                    )
                st.oversample_size = n
        total_space = sum(st.total_space for st in self.stats)
        total_existing = sum(st.existing_derivations for st in self.stats)
        self.p_prov_estimate = float(1 - Fraction(total_existing, total_space))

    def _enumerate_why(self):
        self.why_all: list[AnnotatedDerivation] = []
        pt = self.question.ptuple
        for plan in self.plans:
            rule = plan.rule
            found = []
            for nu in successful_valuations(rule, self.db):
                full = tuple(nu[v] for v in rule.variable_order)
                if matches_ptuple(plan.head(full), pt):
                    found.append(AnnotatedDerivation(rule.rule_id, full, (True,) * len(rule.literals)))
            found = sorted(set(found), key=lambda d: tuple(value_key(a) for a in d.args))
            self.why_all.extend(found)
            self.stats.append(RuleSampleStats(rule.rule_id, count_derivation_space(rule, plan.domains),
                                              0, 0.0, 1.0, 0, survivors=len(found)))
        if not self.why_all:
            raise EmptyProvenanceError(
                f"question has empty provenance of requested type: no answer matches "
                f"{self.question.ptuple}"
            )
        self.p_prov_estimate = None

    def run(self, seed: int | None = None) -> SampleSet:
        seed = self.config.rng_seed if seed is None else seed
        if self.question.qtype is QuestionType.WHY:
            return self._run_why(seed)
        return self._run_whynot(seed)

    def _run_why(self, seed: int) -> SampleSet:
        target = self.config.target_size
        chosen = self.why_all
        if len(chosen) > target:
            rng = _column_rng(seed, 1 << 20)
            keep = np.sort(rng.choice(len(chosen), size=target, replace=False))
            chosen = [chosen[i] for i in keep]
        per_rule = {r.rule_id: [] for r in self.rules}
        for d in chosen:
            per_rule[d.rule_id].append(d)
        stats = [RuleSampleStats(**{**st.__dict__, "quota": len(per_rule[st.rule_id])})
                 for st in self.stats]
        return SampleSet(self.question, list(self.rules), per_rule, None, 0, stats,
                         shortfall=len(chosen) < target)

    def _run_whynot(self, seed: int) -> SampleSet:
        cfg = self.config
        per_rule: dict[str, list[AnnotatedDerivation]] = {}
        stats = []
        shortfall = False
        used = 0
        for plan, base in zip(self.plans, self.stats):
            st = RuleSampleStats(**base.__dict__)
            stats.append(st)
            per_rule[st.rule_id] = []
            if st.quota == 0:
                continue
            found: dict[AnnotatedDerivation, None] = {}
            total = 0
            batch = st.oversample_size
            for attempt in range(cfg.retry_limit + 1):
                idx = plan.draw_indices(batch, seed, attempt)
                for d in plan.derive(idx, keep_existing=False):
                    found.setdefault(d, None)
                total += batch
                st.attempts = attempt + 1
                if len(found) >= st.quota:
                    break
                # shortfall: draw again so the cumulative batch doubles
                batch = total
            st.drawn = total
            used += total
            survivors = list(found)
            st.survivors = len(survivors)
            if len(survivors) > st.quota:
                rng = _column_rng(seed, plan.index, 1 << 20)
                keep = np.sort(rng.choice(len(survivors), size=st.quota, replace=False))
                survivors = [survivors[i] for i in keep]
            elif len(survivors) < st.quota:
                shortfall = True
            per_rule[st.rule_id] = survivors
        if not any(per_rule.values()):
            raise EmptyProvenanceError(
                "question has empty provenance of requested type: no sampled derivation "
                "survived filtering"
            )
        return SampleSet(self.question, list(self.rules), per_rule, self.p_prov_estimate,
                         used, stats, shortfall)


def sample(query: Query, db: Database, question: ProvenanceQuestion, config: SampleConfig,
           overrides: DomainOverrides | None = None) -> SampleSet:
    """Draw a sample of ``config.target_size`` derivations for ``question``."""
    return SamplingPlan(query, db, question, config, overrides).run()
