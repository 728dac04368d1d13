"""EDB storage, attribute domains and set-semantics query evaluation."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .datalog import (
    Comparison,
    Constant,
    Literal,
    Query,
    Rule,
    UnifiedRule,
    Var,
    compare,
    _Parser,
)

COLUMN_TYPES = {"int": int, "string": str}


class StoreError(ValueError):
    code = "store_error"


class EmptyDomainError(StoreError):
    code = "empty_domain"

    def __init__(self, rule_id: str, variable: str):
        super().__init__(
            f"domain of variable {variable} in rule {rule_id} is empty; "
            "no derivations can exist"
        )
        self.rule_id = rule_id
        self.variable = variable


@dataclass(frozen=True)
class Relation:
    name: str
    columns: tuple[str, ...]
    types: tuple[str, ...]
    rows: frozenset[tuple]

    def __post_init__(self):
        if len(self.columns) != len(self.types):
            raise StoreError(f"relation {self.name}: {len(self.columns)} columns but {len(self.types)} types")
        for t in self.types:
            if t not in COLUMN_TYPES:
                raise StoreError(f"relation {self.name}: unknown column type {t!r}")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise StoreError(f"relation {self.name}: row {row} has wrong arity")
            for v, t in zip(row, self.types):
                if type(v) is not COLUMN_TYPES[t]:
                    raise StoreError(f"relation {self.name}: value {v!r} is not of type {t}")

    @property
    def arity(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, row) -> bool:
        return row in self.rows

    def column(self, i: int) -> tuple:
        """Sorted distinct values of column ``i`` (its active domain)."""
        return tuple(sorted({r[i] for r in self.rows}))


class Database:
    """An immutable map from relation names to relations.

    Hash indexes on column subsets are built lazily for joins; they are a
    cache and never change the contents.
    """

    def __init__(self, relations: Iterable[Relation]):
        self.relations: dict[str, Relation] = {}
        for r in relations:
            if r.name in self.relations:
                raise StoreError(f"duplicate relation {r.name}")
            self.relations[r.name] = r
        self._indexes: dict[tuple[str, tuple[int, ...]], dict[tuple, list[tuple]]] = {}
        self._adom: dict[tuple[str, int], tuple] = {}

    def __getitem__(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise StoreError(f"unknown relation {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def __iter__(self) -> Iterator[Relation]:
        return iter(self.relations.values())

    def size(self) -> int:
        return sum(len(r) for r in self)

    def holds(self, relation: str, row: tuple) -> bool:
        return row in self[relation].rows

    def column_domain(self, relation: str, column: int | str) -> tuple:
        rel = self[relation]
        i = rel.columns.index(column) if isinstance(column, str) else column
        key = (relation, i)
        if key not in self._adom:
            self._adom[key] = rel.column(i)
        return self._adom[key]

    def index(self, relation: str, positions: tuple[int, ...]) -> dict[tuple, list[tuple]]:
        key = (relation, positions)
        idx = self._indexes.get(key)
        if idx is None:
            idx = {}
            for row in sorted(self[relation].rows, key=_row_key):
                idx.setdefault(tuple(row[i] for i in positions), []).append(row)
            self._indexes[key] = idx
        return idx

    def check_query(self, query: Query) -> None:
        """Validate relation names, arities and the typing of every variable."""
        for rule in query.rules:
            var_types: dict[Var, str] = {}
            for lit in rule.literals:
                rel = self[lit.relation]
                if rel.arity != len(lit.args):
                    raise StoreError(
                        f"rule {rule.id}: {lit.relation} has arity {rel.arity}, "
                        f"used with {len(lit.args)} arguments"
                    )
                for a, t in zip(lit.args, rel.types):
                    if isinstance(a, Var):
                        if var_types.setdefault(a, t) != t:
                            raise StoreError(f"rule {rule.id}: variable {a} is used as both int and string")
                    elif type(a) is not COLUMN_TYPES[t]:
                        raise StoreError(f"rule {rule.id}: constant {a!r} in {lit.relation} is not of type {t}")
            for c in rule.comparisons:
                kinds = [var_types.get(a) if isinstance(a, Var)
                         else ("int" if isinstance(a, int) else "string") for a in c.args]
                if kinds[0] != kinds[1]:
                    raise StoreError(f"rule {rule.id}: comparison {c} mixes int and string")


def _row_key(row: tuple) -> tuple:
    return tuple((0, v) if isinstance(v, int) else (1, v) for v in row)


def value_key(v):
    """Total order over constants: integers before strings."""
    return (0, v) if isinstance(v, int) else (1, v)


# --------------------------------------------------------------------------
# loading

_SCHEMA_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*\.?\s*$")


def parse_schema(text: str) -> dict[str, tuple[tuple[str, ...], tuple[str, ...]]]:
    """Parse lines ``relation(col:type, ...)`` into name -> (columns, types)."""
    schema = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split("%", 1)[0].strip()
        if not line:
            continue
        m = _SCHEMA_LINE.match(line)
        if not m:
            raise StoreError(f"schema line {lineno}: expected relation(col:type, ...)")
        cols, types = [], []
        for part in filter(None, (p.strip() for p in m.group(2).split(","))):
            name, sep, typ = (s.strip() for s in part.partition(":"))
            if not sep or typ not in COLUMN_TYPES:
                raise StoreError(f"schema line {lineno}: bad column declaration {part!r}")
            cols.append(name)
            types.append(typ)
        if m.group(1) in schema:
            raise StoreError(f"schema line {lineno}: relation {m.group(1)} declared twice")
        schema[m.group(1)] = (tuple(cols), tuple(types))
    return schema


def coerce(value: str, typ: str):
    if typ == "int":
        try:
            return int(value.strip())
        except ValueError:
            raise StoreError(f"cannot read {value!r} as int") from None
    v = value
    if len(v) >= 2 and v[0] == v[-1] == "'":
        v = v[1:-1]
    return v


def load_csv(directory: str | Path, schema: Mapping | str) -> Database:
    """Load ``<directory>/<relation>.csv`` for every relation in ``schema``.

    ``schema`` is either the text of a schema file or its parsed form.  Each
    CSV has a header row naming the columns; duplicate rows are dropped.
    """
    if isinstance(schema, str):
        schema = parse_schema(schema)
    directory = Path(directory)
    relations = []
    for name, (cols, types) in schema.items():
        path = directory / f"{name}.csv"
        if not path.exists():
            raise StoreError(f"missing data file {path}")
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            rows = set()
            if header is not None:
                header = [h.strip() for h in header]
                if sorted(header) != sorted(cols):
                    raise StoreError(f"{path}: header {header} does not match columns {list(cols)}")
                order = [header.index(c) for c in cols]
                for lineno, rec in enumerate(reader, 2):
                    if not rec or all(not x.strip() for x in rec):
                        continue
                    if len(rec) != len(cols):
                        raise StoreError(f"{path} line {lineno}: expected {len(cols)} values, got {len(rec)}")
                    try:
                        rows.add(tuple(coerce(rec[i], t) for i, t in zip(order, types)))
                    except StoreError as e:
                        raise StoreError(f"{path} line {lineno}: {e}") from None
        relations.append(Relation(name, tuple(cols), tuple(types), frozenset(rows)))
    return Database(relations)


def write_csv(db: Database, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for rel in db:
        with open(directory / f"{rel.name}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(rel.columns)
            for row in sorted(rel.rows, key=_row_key):
                w.writerow(row)


def format_schema(db: Database) -> str:
    return "".join(
        f"{r.name}({', '.join(f'{c}:{t}' for c, t in zip(r.columns, r.types))})\n" for r in db
    )


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class VarDomain:
    variable: Var
    values: tuple
    source: str = "default-active"

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class DomainOverrides:
    """User-supplied domains.

    ``attributes`` maps (relation, column name) to the replacement domain of
    that attribute; ``variables`` maps (rule id, variable name) to the domain
    of one variable.  ``universal`` replaces every attribute domain by the
    active domain of the whole database (restricted to the column's type).
    """

    attributes: dict[tuple[str, str], tuple] = field(default_factory=dict)
    variables: dict[tuple[str, str], tuple] = field(default_factory=dict)
    universal: bool = False


_OVERRIDE_LINE = re.compile(
    r"^\s*(attr|var)\s+([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*\{(.*)\}\s*$"
)


def parse_domain_overrides(text: str) -> DomainOverrides:
    """Parse ``attr R.col = {v, ...}`` and ``var r1.X = {v, ...}`` lines."""
    out = DomainOverrides()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        m = _OVERRIDE_LINE.match(line)
        if not m:
            raise StoreError(f"domain file line {lineno}: cannot parse {raw!r}")
        kind, owner, name, body = m.groups()
        values = []
        if body.strip():
            p = _Parser(body, bare_strings=True)
            values.append(p.term())
            while p.at("punct", ","):
                p.i += 1
                values.append(p.term())
            if not p.at("eof"):
                raise StoreError(f"domain file line {lineno}: trailing input")
        if any(isinstance(v, Var) for v in values):
            raise StoreError(f"domain file line {lineno}: domain values must be constants")
        target = out.attributes if kind == "attr" else out.variables
        target[(owner, name)] = tuple(sorted(set(values), key=value_key))
    return out


def attribute_domain(db: Database, relation: str, column: int,
                     overrides: DomainOverrides | None = None) -> tuple:
    rel = db[relation]
    if overrides is not None:
        ov = overrides.attributes.get((relation, rel.columns[column]))
        if ov is not None:
            return tuple(coerce(v, rel.types[column]) if isinstance(v, str) and rel.types[column] == "int" else v
                         for v in ov)
        if overrides.universal:
            return universal_domain(db, rel.types[column])
    return db.column_domain(relation, column)


def universal_domain(db: Database, typ: str) -> tuple:
    values = set()
    for rel in db:
        for i, t in enumerate(rel.types):
            if t == typ:
                values.update(db.column_domain(rel.name, i))
    return tuple(sorted(values, key=value_key))


def attribute_distinct_counts(db: Database) -> dict[str, int]:
    """Distinct values per attribute name, pooling same-named columns."""
    pooled: dict[str, set] = {}
    for rel in db:
        for i, c in enumerate(rel.columns):
            pooled.setdefault(c, set()).update(db.column_domain(rel.name, i))
    return {c: len(v) for c, v in pooled.items()}


def var_domain(rule: UnifiedRule, var: Var, db: Database,
               overrides: DomainOverrides | None = None) -> VarDomain:
    """Domain of an unbound variable of ``rule``.

    The union of the domains of every attribute ``var`` occupies in a
    positive literal (or the user override), filtered by the comparisons of
    ``var`` against constants.  Values come out sorted.
    """
    if var not in rule.unbound_vars:
        raise StoreError(f"{var} is not an unbound variable of rule {rule.rule_id}")
    source = "default-active"
    ov = overrides.variables.get((rule.rule_id, var.name)) if overrides else None
    if ov is not None:
        values = set(ov)
        source = "user-supplied"
    else:
        values = set()
        for lit in rule.literals:
            if lit.negated:
                continue
            for i, a in enumerate(lit.args):
                if a == var:
                    values.update(attribute_domain(db, lit.relation, i, overrides))
        if overrides and any((lit.relation, db[lit.relation].columns[i]) in overrides.attributes
                             for lit in rule.literals if not lit.negated
                             for i, a in enumerate(lit.args) if a == var):
            source = "user-supplied"
    preds = rule.var_const_comparisons(var)
    kept = [v for v in values if all(compare(op, v, c) for op, c in preds)]
    if not kept:
        raise EmptyDomainError(rule.rule_id, var.name)
    return VarDomain(var, tuple(sorted(kept, key=value_key)), source)


def rule_domains(rule: UnifiedRule, db: Database,
                 overrides: DomainOverrides | None = None) -> dict[Var, VarDomain]:
    return {v: var_domain(rule, v, db, overrides) for v in rule.unbound_vars}


# --------------------------------------------------------------------------
# evaluation


def ground(args: Sequence, valuation: Mapping[Var, Constant]) -> tuple:
    try:
        return tuple(valuation[a] if isinstance(a, Var) else a for a in args)
    except KeyError as e:
        raise StoreError(f"variable {e.args[0]} is unbound") from None


def goal_holds(db: Database, goal: Literal | Comparison, valuation: Mapping[Var, Constant]) -> bool:
    """Truth of a grounded goal: membership, absence or comparison."""
    if isinstance(goal, Comparison):
        left, right = ground(goal.args, valuation)
        return compare(goal.op, left, right)
    present = db.holds(goal.relation, ground(goal.args, valuation))
    return not present if goal.negated else present


def successful_valuations(rule: Rule | UnifiedRule, db: Database) -> Iterator[dict[Var, Constant]]:
    """All valuations under which every goal of ``rule`` succeeds.

    Nested-loop join over the positive literals in body order; each inner
    loop probes a hash index on the positions already bound.  Negated
    literals and comparisons are applied as filters as soon as their
    variables are bound.
    """
    if isinstance(rule, UnifiedRule):
        literals, comparisons, preset = rule.literals, rule.comparisons, dict(rule.bindings)
    else:
        literals, comparisons, preset = rule.literals, rule.comparisons, {}
    positives = [g for g in literals if not g.negated]
    # filters[i] runs once positives[0..i] are bound; ground goals go first
    ground_goals = []
    filters: list[list] = [[] for _ in range(len(positives))]
    bound = set(preset)
    levels: list[set] = []
    for g in positives:
        bound |= set(g.variables())
        levels.append(set(bound))
    for f in [g for g in literals if g.negated] + list(comparisons):
        fv = set(f.variables())
        if not fv:
            ground_goals.append(f)
            continue
        level = next(i for i, b in enumerate(levels) if fv <= b)
        filters[level].append(f)

    def passes(level: int, nu) -> bool:
        return all(goal_holds(db, f, nu) for f in filters[level])

    def solve(i: int, nu: dict):
        if i == len(positives):
            yield dict(nu)
            return
        g = positives[i]
        const_pos, var_pos, fresh = [], {}, []
        key = []
        for j, a in enumerate(g.args):
            if isinstance(a, Var):
                if a in nu:
                    const_pos.append(j)
                    key.append(nu[a])
                elif a in var_pos:
                    fresh.append((j, var_pos[a]))
                else:
                    var_pos[a] = j
            else:
                const_pos.append(j)
                key.append(a)
        candidates = db.index(g.relation, tuple(const_pos)).get(tuple(key), ())
        for row in candidates:
            if any(row[j] != row[k] for j, k in fresh):
                continue
            for v, j in var_pos.items():
                nu[v] = row[j]
            if passes(i, nu):
                yield from solve(i + 1, nu)
            for v in var_pos:
                del nu[v]

    if all(goal_holds(db, f, preset) for f in ground_goals):
        yield from solve(0, dict(preset))


def evaluate_rule(rule: Rule | UnifiedRule, db: Database) -> set[tuple]:
    head = rule.base.head if isinstance(rule, UnifiedRule) else rule.head
    return {ground(head.args, nu) for nu in successful_valuations(rule, db)}


def evaluate(query: Query, db: Database) -> Relation:
    """Q(D) under set semantics, as a relation named after the head predicate."""
    db.check_query(query)
    rows: set[tuple] = set()
    for r in query.rules:
        rows |= evaluate_rule(r, db)
    types = _head_types(query, db, rows)
    cols = tuple(f"c{i}" for i in range(query.head_arity))
    return Relation(query.head_predicate, cols, types, frozenset(rows))


def _head_types(query: Query, db: Database, rows) -> tuple[str, ...]:
    types: list[str | None] = [None] * query.head_arity
    for r in query.rules:
        var_types = {}
        for lit in r.literals:
            for a, t in zip(lit.args, db[lit.relation].types):
                if isinstance(a, Var):
                    var_types.setdefault(a, t)
        for i, a in enumerate(r.head.args):
            if types[i] is None:
                if isinstance(a, Var):
                    types[i] = var_types.get(a)
                else:
                    types[i] = "int" if isinstance(a, int) else "string"
    return tuple(t or "string" for t in types)
