"""Derivation patterns: LCA candidate generation, matching and quality metrics."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .datalog import PTuple, Var, format_constant
from .relstore import value_key
from .sampler import AnnotatedDerivation, SampleSet


class PatternError(ValueError):
    code = "pattern_error"


@dataclass(frozen=True)
class DerivationPattern:
    """Constants or placeholders over a rule's variables plus goal annotations.

    A placeholder is stored as ``None``.  LCA never repeats a placeholder,
    so all placeholders are interchangeable and structural equality is
    plain tuple equality.
    """

    rule_id: str
    args: tuple
    goal_annotations: tuple[bool, ...]

    @property
    def constant_count(self) -> int:
        return sum(1 for a in self.args if a is not None)

    @property
    def arity(self) -> int:
        return len(self.args)

    @classmethod
    def of(cls, d: AnnotatedDerivation) -> DerivationPattern:
        return cls(d.rule_id, tuple(d.args), tuple(d.goal_annotations))

    def format(self, variables: Sequence[Var] | None = None) -> str:
        """Render as ``r1(2,4,Z)-(F,F)``; placeholders take the rule's
        variable names when ``variables`` is given, else ``_``."""
        parts = []
        for i, a in enumerate(self.args):
            if a is None:
                parts.append(variables[i].name if variables else "_")
            else:
                parts.append(format_constant(a))
        ann = ",".join("T" if g else "F" for g in self.goal_annotations)
        return f"{self.rule_id}({','.join(parts)})-({ann})"

    def sort_key(self) -> tuple:
        return (self.rule_id, self.goal_annotations,
                tuple((0,) if a is None else (1,) + value_key(a) for a in self.args))

    def __str__(self) -> str:
        return self.format()


@dataclass(frozen=True)
class PatternCandidate:
    pattern: DerivationPattern
    match_count: int
    sample_size: int
    info: float
    match_mask: int | None = None

    @property
    def cp_estimate(self) -> Fraction:
        if self.sample_size == 0:
            return Fraction(0)
        return Fraction(self.match_count, self.sample_size)

    @property
    def cp(self) -> float:
        return float(self.cp_estimate)


def lca(d1: AnnotatedDerivation, d2: AnnotatedDerivation) -> DerivationPattern:
    """Keep agreeing constants, replace disagreeing ones by placeholders."""
    if d1.rule_id != d2.rule_id:
        raise PatternError(f"cannot pair derivations of rules {d1.rule_id} and {d2.rule_id}")
    if tuple(d1.goal_annotations) != tuple(d2.goal_annotations):
        raise PatternError("only derivations with equal goal annotations are paired")
    if len(d1.args) != len(d2.args):
        raise PatternError("derivations differ in arity")
    args = tuple(a if a == b else None for a, b in zip(d1.args, d2.args))
    return DerivationPattern(d1.rule_id, args, tuple(d1.goal_annotations))


def pattern_matches(p: DerivationPattern, d: AnnotatedDerivation) -> bool:
    """Positional check; valid because no placeholder occurs twice."""
    if p.rule_id != d.rule_id or len(p.args) != len(d.args):
        return False
    if tuple(p.goal_annotations) != tuple(d.goal_annotations):
        return False
    return all(a is None or a == b for a, b in zip(p.args, d.args))


def informativeness(p: DerivationPattern, pt: PTuple) -> float:
    """Share of the arguments not fixed by the question that ``p`` fixes."""
    fixed = pt.constant_count
    free = p.arity - fixed
    if free <= 0:
        return 0.0
    value = (p.constant_count - fixed) / free
    return min(1.0, max(0.0, value))


# --------------------------------------------------------------------------
# vectorised encoding


class _Encoded:
    """Derivations of one (rule, annotation) class as a matrix of value codes."""

    def __init__(self, rows: list[tuple], indices: list[int]):
        self.indices = np.asarray(indices, dtype=np.int64)
        arity = len(rows[0]) if rows else 0
        self.decode: list[list] = []
        codes = np.empty((len(rows), arity), dtype=np.int64)
        for j in range(arity):
            values = sorted({r[j] for r in rows}, key=value_key)
            self.decode.append(values)
            lookup = {v: i for i, v in enumerate(values)}
            codes[:, j] = [lookup[r[j]] for r in rows]
        self.codes = codes


def _classes(derivations: Sequence[AnnotatedDerivation]) -> dict[tuple, _Encoded]:
    groups: dict[tuple, tuple[list, list]] = {}
    for i, d in enumerate(derivations):
        rows, idx = groups.setdefault((d.rule_id, tuple(d.goal_annotations)), ([], []))
        rows.append(tuple(d.args))
        idx.append(i)
    return {key: _Encoded(rows, idx) for key, (rows, idx) in groups.items()}


def _unique_rows(m: np.ndarray) -> np.ndarray:
    if len(m) == 0:
        return m
    return np.unique(m, axis=0)


def generate_candidates(s: SampleSet | Sequence[AnnotatedDerivation],
                        chunk_pairs: int = 2_000_000) -> list[DerivationPattern]:
    """LCA of every unordered pair (self-pairs included) within each
    annotation class of each rule, deduplicated.

    Output order is deterministic: rules in sample order, annotation classes
    and patterns sorted by their value codes (placeholder first).
    """
    derivations = s.derivations() if isinstance(s, SampleSet) else list(s)
    rule_order: dict[str, int] = {}
    for d in derivations:
        rule_order.setdefault(d.rule_id, len(rule_order))
    classes = _classes(derivations)
    out: list[DerivationPattern] = []
    for key in sorted(classes, key=lambda k: (rule_order[k[0]], k[1])):
        enc = classes[key]
        codes = enc.codes
        n = len(codes)
        found = []
        # rows i pair with all j >= i; process blocks of rows per chunk
        step = max(1, chunk_pairs // max(1, n))
        for start in range(0, n, step):
            block = []
            for i in range(start, min(n, start + step)):
                other = codes[i:]
                block.append(np.where(other == codes[i], codes[i], -1))
            found.append(_unique_rows(np.concatenate(block)))
        uniq = _unique_rows(np.concatenate(found)) if found else codes[:0]
        for row in uniq.tolist():
            args = tuple(None if c < 0 else enc.decode[j][c] for j, c in enumerate(row))
            out.append(DerivationPattern(key[0], args, key[1]))
    return out


class MatchIndex:
    """Answers "which derivations match this pattern" in bulk.

    Candidates are grouped by the set of positions holding constants; for
    each group the derivations of a class are hashed on their projection
    onto those positions, so one pass serves every pattern in the group.
    """

    def __init__(self, derivations: Sequence[AnnotatedDerivation]):
        self.derivations = list(derivations)
        self.size = len(self.derivations)
        self._classes: dict[tuple, list[tuple[int, tuple]]] = {}
        for i, d in enumerate(self.derivations):
            self._classes.setdefault((d.rule_id, tuple(d.goal_annotations)), []).append((i, tuple(d.args)))
        self._tables: dict[tuple, dict[tuple, list[int]]] = {}

    def _table(self, key: tuple, positions: tuple[int, ...]) -> dict[tuple, list[int]]:
        tkey = (key, positions)
        table = self._tables.get(tkey)
        if table is None:
            table = {}
            for i, args in self._classes.get(key, ()):
                table.setdefault(tuple(args[j] for j in positions), []).append(i)
            self._tables[tkey] = table
        return table

    def matches(self, p: DerivationPattern) -> list[int]:
        positions = tuple(j for j, a in enumerate(p.args) if a is not None)
        key = (p.rule_id, tuple(p.goal_annotations))
        if key not in self._classes:
            return []
        proj = tuple(p.args[j] for j in positions)
        return self._table(key, positions).get(proj, [])

    def count(self, p: DerivationPattern) -> int:
        return len(self.matches(p))

    def mask(self, p: DerivationPattern) -> int:
        bits = np.zeros(self.size, dtype=bool)
        bits[self.matches(p)] = True
        return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def estimate_completeness(candidates: Iterable[DerivationPattern],
                          s: SampleSet | Sequence[AnnotatedDerivation],
                          pt: PTuple | None = None,
                          with_masks: bool = True) -> list[PatternCandidate]:
    """Attach match counts, completeness estimates and informativeness.

    The denominator is the size of the whole sample across rules.  Bit ``i``
    of ``match_mask`` is set when derivation ``i`` of the sample matches.
    """
    if isinstance(s, SampleSet):
        derivations = s.derivations()
        pt = pt or s.question.ptuple
    else:
        derivations = list(s)
    if not derivations:
        raise PatternError("completeness is undefined over an empty sample")
    if pt is None:
        raise PatternError("a p-tuple is needed to compute informativeness")
    index = MatchIndex(derivations)
    out = []
    for p in candidates:
        hits = index.matches(p)
        mask = index.mask(p) if with_masks else None
        out.append(PatternCandidate(p, len(hits), index.size, informativeness(p, pt), mask))
    return out
