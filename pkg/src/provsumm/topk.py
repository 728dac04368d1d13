"""Choosing up to k patterns with the best harmonic-mean score.

Set completeness is either exact (the union of the members' match masks over
the sample) or bounded from the pattern structure: a pattern generalized by
another member adds nothing to the upper bound, and pairwise disjoint members
add up exactly, which gives the lower bound.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

from .patterns import DerivationPattern, PatternCandidate

TIE_EPS = 1e-12
EXACT_CLIQUE_LIMIT = 10


def generalizes(general: DerivationPattern, specific: DerivationPattern) -> bool:
    """True iff every derivation matched by ``specific`` is matched by ``general``.

    Same rule and annotations, and each constant of ``general`` occurs at the
    same position of ``specific``.  In the order notation this is
    ``specific`` ⪯ ``general``.
    """
    if general.rule_id != specific.rule_id or len(general.args) != len(specific.args):
        return False
    if tuple(general.goal_annotations) != tuple(specific.goal_annotations):
        return False
    return all(g is None or g == s for g, s in zip(general.args, specific.args))


def is_generalized_by(p1: DerivationPattern, p2: DerivationPattern) -> bool:
    """``p1 ⪯ p2``: p2 generalizes p1."""
    return generalizes(p2, p1)


def disjoint(p1: DerivationPattern, p2: DerivationPattern) -> bool:
    """True when no derivation can match both patterns."""
    if p1.rule_id != p2.rule_id or len(p1.args) != len(p2.args):
        return True
    if tuple(p1.goal_annotations) != tuple(p2.goal_annotations):
        return True
    return any(a is not None and b is not None and a != b for a, b in zip(p1.args, p2.args))


def harmonic(cp, info):
    """Harmonic mean of completeness and informativeness (0 if both are 0)."""
    if cp + info == 0:
        return 0 * cp
    return 2 * cp * info / (cp + info)


def _mean(values: Sequence):
    if not values:
        return 0.0
    if all(isinstance(v, Rational) for v in values):
        return Fraction(sum(values), len(values))
    # fsum is exact before rounding, so the mean does not depend on order
    return math.fsum(values) / len(values)


def _cp(c: PatternCandidate | tuple):
    return c.cp_estimate if isinstance(c, PatternCandidate) else c[1]


def _pat(c: PatternCandidate | tuple) -> DerivationPattern:
    return c.pattern if isinstance(c, PatternCandidate) else c[0]


def _info(c: PatternCandidate | tuple):
    return c.info if isinstance(c, PatternCandidate) else c[2]


def naive_cp_bounds(members: Sequence) -> tuple:
    """Bounds that ignore pattern structure: (max cp, min(1, sum cp))."""
    if not members:
        return (0, 0)
    cps = [_cp(m) for m in members]
    return (max(cps), min(1, sum(cps)))


def max_disjoint_weight(members: Sequence, exact_limit: int = EXACT_CLIQUE_LIMIT):
    """Largest total cp over pairwise-disjoint members.

    Exhaustive over subsets up to ``exact_limit`` members, greedy by
    descending cp beyond that.
    """
    n = len(members)
    if n == 0:
        return 0
    cps = [_cp(m) for m in members]
    pats = [_pat(m) for m in members]
    compat = [[i != j and disjoint(pats[i], pats[j]) for j in range(n)] for i in range(n)]
    if n > exact_limit:
        chosen: list[int] = []
        for i in sorted(range(n), key=lambda i: (-cps[i], i)):
            if all(compat[i][j] for j in chosen):
                chosen.append(i)
        return sum(cps[i] for i in chosen)
    best = 0

    def grow(start: int, chosen: list[int], weight):
        nonlocal best
        if weight > best:
            best = weight
        for i in range(start, n):
            if all(compat[i][j] for j in chosen):
                chosen.append(i)
                grow(i + 1, chosen, weight + cps[i])
                chosen.pop()

    grow(0, [], 0)
    return best


def cp_bounds(members: Sequence, exact_limit: int = EXACT_CLIQUE_LIMIT) -> tuple:
    """(lower, upper) bounds on the completeness of a pattern set.

    ``members`` are PatternCandidates or (pattern, cp, info) triples; cp
    values may be Fractions, in which case the bounds are exact rationals.
    """
    if not members:
        return (0, 0)
    pats = [_pat(m) for m in members]
    cps = [_cp(m) for m in members]
    maximal = []
    for i, p in enumerate(pats):
        dominated = False
        for j, q in enumerate(pats):
            if i == j or not generalizes(q, p):
                continue
            # identical patterns: keep the first copy only
            if p == q and j > i:
                continue
            dominated = True
            break
        if not dominated:
            maximal.append(i)
    ub = min(1, sum(cps[i] for i in maximal))
    lb = max(max(cps), max_disjoint_weight(members, exact_limit))
    ub = max(ub, max(cps))
    lb = min(lb, ub)
    return (lb, ub)


def set_info(members: Sequence):
    return _mean([_info(m) for m in members])


def score_bounds(members: Sequence, k: int, remaining: Sequence = (),
                 cp_range: tuple | None = None) -> tuple:
    """Score bounds for a set and, if it is smaller than ``k``, its extensions.

    ``remaining`` lists the candidates that may still be added.  The upper
    bound lets up to ``k - |set|`` of them each add their full cp and the
    largest remaining info; the lower bound scores the set as it is.
    """
    lb_cp, ub_cp = cp_range if cp_range is not None else cp_bounds(members)
    infos = [_info(m) for m in members]
    info = _mean(infos)
    lb = harmonic(lb_cp, info)
    slots = max(0, k - len(members))
    rest = sorted((_ for _ in remaining), key=lambda m: -_cp(m))
    ub = harmonic(ub_cp, info)
    if slots and rest:
        max_info = max(_info(m) for m in rest)
        for j in range(1, min(slots, len(rest)) + 1):
            cp = min(1, ub_cp + sum(_cp(m) for m in rest[:j]))
            inf = max(info, _mean(infos + [max_info] * j)) if infos else max_info
            ub = max(ub, harmonic(cp, inf))
    return (lb, ub)


@dataclass(frozen=True)
class CandidateSet:
    members: tuple[int, ...]
    cp_lb: float
    cp_ub: float
    info: float
    score_lb: float
    score_ub: float
    ext_ub: float
    complete: bool


@dataclass
class SummaryResult:
    patterns: list[PatternCandidate]
    score_lb: float
    score_ub: float
    cp_lb: float
    cp_ub: float
    info: float
    exact: bool
    indices: tuple[int, ...] = ()
    nodes: int = 0
    method: str = "best-first"

    @property
    def score(self) -> float:
        return self.score_lb if self.score_lb == self.score_ub else (self.score_lb + self.score_ub) / 2


def canonical_order(candidates: Sequence[PatternCandidate]) -> list[int]:
    """Candidate indices by descending cp, ties by position.

    Tie-breaking between equally scored sets compares their members'
    positions in this order lexicographically.
    """
    return sorted(range(len(candidates)), key=lambda i: (-candidates[i].cp_estimate, i))


def better(score_a, key_a: tuple, score_b, key_b: tuple | None) -> bool:
    """Whether (score_a, key_a) beats (score_b, key_b).

    Scores within TIE_EPS count as equal; then the smaller key wins.
    """
    if key_b is None:
        return True
    if score_a > score_b + TIE_EPS:
        return True
    if score_a < score_b - TIE_EPS:
        return False
    return key_a < key_b


def union_count(masks: Sequence[int]) -> int:
    m = 0
    for x in masks:
        m |= x
    return m.bit_count()


def _result(cands: Sequence[PatternCandidate], order: Sequence[int], node: CandidateSet,
            exact: bool, nodes: int, method: str) -> SummaryResult:
    """``cands`` are in canonical order; ``order`` maps back to input positions."""
    return SummaryResult([cands[i] for i in node.members], float(node.score_lb),
                         float(node.score_ub), float(node.cp_lb), float(node.cp_ub),
                         float(node.info), exact, tuple(order[i] for i in node.members),
                         nodes, method)


def best_first_topk(candidates: Sequence[PatternCandidate], k: int, use_masks: bool | None = None,
                    max_nodes: int = 200_000) -> SummaryResult:
    """Best-first branch and bound over sets of at most ``k`` candidates.

    Sets are built from candidates in canonical order, each extension adding a
    later candidate, so every set is produced once.  The queue is ordered by
    the extension upper bound; a node is pruned when no extension can beat
    the incumbent.  With exact set completeness (match masks) the incumbent
    is optimal once the queue empties.  With structural bounds the result is
    certified only if its lower bound reaches every surviving upper bound,
    otherwise the set with the best bound midpoint is returned.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    pool = [i for i, c in enumerate(candidates) if c.match_count > 0]
    if not pool:
        return SummaryResult([], 0.0, 0.0, 0.0, 0.0, 0.0, True, (), 0)
    if use_masks is None:
        use_masks = all(candidates[i].match_mask is not None for i in pool)
    order = [i for i in canonical_order(candidates) if candidates[i].match_count > 0]
    cands = [candidates[i] for i in order]
    n = len(cands)
    cps = [c.cp for c in cands]
    infos = [c.info for c in cands]
    total = cands[0].sample_size
    # prefix[i] = sum cps[:i]; suffix_info[i] = max infos[i:]
    prefix = [0.0]
    for x in cps:
        prefix.append(prefix[-1] + x)
    suffix_info = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_info[i] = max(infos[i], suffix_info[i + 1])

    def evaluate(key: tuple[int, ...], mask: int) -> CandidateSet:
        members = [cands[i] for i in key]
        if use_masks:
            cp_lb = cp_ub = mask.bit_count() / total
        else:
            cp_lb, cp_ub = cp_bounds(members)
            cp_lb, cp_ub = float(cp_lb), float(cp_ub)
        info = _mean([infos[i] for i in key])
        lb, ub = harmonic(cp_lb, info), harmonic(cp_ub, info)
        ext = ub
        start = key[-1] + 1
        slots = min(k - len(key), n - start)
        info_sum = math.fsum(infos[i] for i in key)
        for j in range(1, slots + 1):
            cp = min(1.0, cp_ub + prefix[start + j] - prefix[start])
            inf = max(info, (info_sum + j * suffix_info[start]) / (len(key) + j))
            ext = max(ext, harmonic(cp, inf))
        return CandidateSet(key, cp_lb, cp_ub, info, lb, ub, ext, len(key) == k)

    created = 0
    best: CandidateSet | None = None
    best_key = None
    heap: list = []
    masks: dict[tuple, int] = {}
    max_ub_seen = 0.0  # own upper bounds of nodes that were not pruned
    kept: list[CandidateSet] = []

    def offer(node: CandidateSet, mask: int):
        nonlocal best, best_key, created, max_ub_seen
        created += 1
        if better(node.score_lb, node.members, best.score_lb if best else 0, best_key):
            best, best_key = node, node.members
        if not _prunable(node):
            max_ub_seen = max(max_ub_seen, node.score_ub)
            if not use_masks:
                kept.append(node)
            if len(node.members) < k and node.members[-1] + 1 < n:
                masks[node.members] = mask
                heapq.heappush(heap, (-node.ext_ub, -node.score_lb, node.members, node))

    def _prunable(node: CandidateSet) -> bool:
        if best is None or node is best:
            return False
        if node.ext_ub < best.score_lb - TIE_EPS:
            return True
        # a tie can only win on the key; every extension's key is larger than
        # this node's key, so a smaller incumbent key settles it
        return node.ext_ub <= best.score_lb + TIE_EPS and best_key < node.members

    for i in range(n):
        m = cands[i].match_mask if use_masks else 0
        offer(evaluate((i,), m), m)
    truncated = False
    while heap:
        _, _, key, node = heapq.heappop(heap)
        mask = masks.pop(key)
        if _prunable(node):
            continue
        if created >= max_nodes:
            truncated = True
            break
        for j in range(key[-1] + 1, n):
            if use_masks:
                child_mask = mask | cands[j].match_mask
            else:
                child_mask = 0
            offer(evaluate(key + (j,), child_mask), child_mask)
    assert best is not None
    exact = not truncated and (use_masks or best.score_lb >= max_ub_seen - TIE_EPS)
    if not exact and not use_masks:
        # heuristic fallback: best midpoint of the bounds among kept nodes
        pick = best
        for node in kept:
            mid = (node.score_lb + node.score_ub) / 2
            if better(mid, node.members, (pick.score_lb + pick.score_ub) / 2, pick.members):
                pick = node
        best = pick
    return _result(cands, order, best, exact, created, "best-first")
