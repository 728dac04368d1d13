"""SQL text for the sampling pipeline, one statement chain per rule.

Five statements per unified rule, each creating a temporary table:

``<r>_bind``
    per-variable samples drawn with replacement, row-numbered and zipped on
    the row number, then filtered by comparisons between variables
``<r>_der``
    anti-join against the existing answers (``NOT EXISTS``)
``<r>_sample``
    goal flags from left outer joins (``CASE WHEN ... IS NULL``), duplicate
    elimination and a uniform cut to the sample size
``<r>_lca``
    self-join on equal goal flags; disagreeing values become ``NULL``
``<r>_match``
    match counts per pattern via ``GROUP BY``

Batch and sample sizes are inlined when given, otherwise left as the named
parameters ``:n_os_<r>`` and ``:sample_size_<r>``.  The text is run-tested
against SQLite; nothing here executes it.
"""
from __future__ import annotations

import sqlite3
from typing import Mapping

from .datalog import (
    Comparison,
    ProvenanceQuestion,
    Query,
    QuestionType,
    Rule,
    UnifiedRule,
    Var,
    unify_query,
)
from .relstore import Database, DomainOverrides, EmptyDomainError, rule_domains


class SQLGenError(ValueError):
    code = "sql_unsupported"


def ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def literal(value) -> str:
    if isinstance(value, bool):
        raise SQLGenError("booleans are not constants")
    if isinstance(value, int):
        return str(value)
    return "'" + str(value).replace("'", "''") + "'"


def _values_select(values) -> str:
    return " UNION ".join(f"SELECT {literal(v)} AS v" for v in values)


def _domain_source(rule: UnifiedRule, var: Var, db: Database,
                   overrides: DomainOverrides | None) -> str:
    if overrides and (rule.rule_id, var.name) in overrides.variables:
        return _values_select(overrides.variables[(rule.rule_id, var.name)])
    parts = []
    for lit in rule.literals:
        if lit.negated:
            continue
        rel = db[lit.relation]
        for i, a in enumerate(lit.args):
            if a != var:
                continue
            key = (lit.relation, rel.columns[i])
            if overrides and key in overrides.attributes:
                parts.append(_values_select(overrides.attributes[key]))
            elif overrides and overrides.universal:
                for other in db:
                    for j, t in enumerate(other.types):
                        if t == rel.types[i]:
                            parts.append(f"SELECT {ident(other.columns[j])} AS v FROM {ident(other.name)}")
            else:
                parts.append(f"SELECT {ident(rel.columns[i])} AS v FROM {ident(lit.relation)}")
    # UNION removes duplicates across sources
    return " UNION ".join(dict.fromkeys(parts))


def _cmp_sql(c: Comparison, expr) -> str:
    def term(t):
        return expr(t) if isinstance(t, Var) else literal(t)

    return f"{term(c.left)} {c.op.value} {term(c.right)}"


def answers_sql(query: Query, db: Database) -> str:
    """SELECT statement computing the query result with columns c0, c1, ..."""
    selects = []
    for rule in query.rules:
        selects.append(_rule_cq(rule, db))
    return "\n  UNION\n  ".join(selects)


def _rule_cq(rule: Rule, db: Database) -> str:
    first: dict[Var, str] = {}
    conds = []
    froms = []
    positives = [g for g in rule.literals if not g.negated]
    for n, g in enumerate(positives, 1):
        alias = f"a{n}"
        froms.append(f"{ident(g.relation)} AS {alias}")
        cols = db[g.relation].columns
        for i, a in enumerate(g.args):
            col = f"{alias}.{ident(cols[i])}"
            if isinstance(a, Var):
                if a in first:
                    conds.append(f"{col} = {first[a]}")
                else:
                    first[a] = col
            else:
                conds.append(f"{col} = {literal(a)}")
    for n, g in enumerate([g for g in rule.literals if g.negated], 1):
        cols = db[g.relation].columns
        alias = f"n{n}"
        inner = [f"{alias}.{ident(cols[i])} = {first[a] if isinstance(a, Var) else literal(a)}"
                 for i, a in enumerate(g.args)] or ["1 = 1"]
        conds.append(f"NOT EXISTS (SELECT 1 FROM {ident(g.relation)} AS {alias} WHERE {' AND '.join(inner)})")
    for c in rule.comparisons:
        conds.append(_cmp_sql(c, lambda v: first[v]))
    head = ", ".join(f"{first[a] if isinstance(a, Var) else literal(a)} AS c{i}"
                     for i, a in enumerate(rule.head.args))
    where = " AND ".join(conds) if conds else "1 = 1"
    return f"SELECT DISTINCT {head} FROM {', '.join(froms)} WHERE {where}"


def _flag_name(i: int) -> str:
    # variables start upper-case, so underscore names cannot collide
    return f"_g{i}"


def rule_pipeline(rule: UnifiedRule, query: Query, db: Database,
                  n_os: int | None = None, sample_size: int | None = None,
                  overrides: DomainOverrides | None = None) -> list[str]:
    """The five statements for one unified rule."""
    r = rule.rule_id
    n_param = str(n_os) if n_os is not None else f":n_os_{r}"
    s_param = str(sample_size) if sample_size is not None else f":sample_size_{r}"
    rule_domains(rule, db, overrides)  # raises when a domain is empty
    vars_all = rule.variable_order
    cols = [ident(v.name) for v in vars_all]
    unbound = rule.unbound_vars

    # 1. bind
    ctes = [f"seq(n) AS (SELECT 1 UNION ALL SELECT n + 1 FROM seq WHERE n < {n_param})"]
    for v in unbound:
        src = _domain_source(rule, v, db, overrides)
        filters = " AND ".join(f"v {op.value} {literal(c)}" for op, c in rule.var_const_comparisons(v))
        where = f" WHERE {filters}" if filters else ""
        ctes.append(f"dom_{v.name} AS (SELECT v, ROW_NUMBER() OVER (ORDER BY v) - 1 AS i "
                    f"FROM ({src}) AS u{where})")
        ctes.append(f"pick_{v.name} AS (SELECT seq.n AS id, ((RANDOM() % c.cnt) + c.cnt) % c.cnt AS i "
                    f"FROM seq, (SELECT COUNT(*) AS cnt FROM dom_{v.name}) AS c)")
        ctes.append(f"q_{v.name} AS (SELECT pick_{v.name}.id AS id, dom_{v.name}.v AS {ident(v.name)} "
                    f"FROM pick_{v.name} JOIN dom_{v.name} ON pick_{v.name}.i = dom_{v.name}.i)")

    def bexpr(v: Var) -> str:
        if v in rule.bindings:
            return literal(rule.bindings[v])
        return f"q_{v.name}.{ident(v.name)}"

    select = ", ".join(f"{bexpr(v)} AS {ident(v.name)}" for v in vars_all) or "1 AS _unit"
    if unbound:
        first = unbound[0]
        joins = "".join(f" JOIN q_{v.name} ON q_{v.name}.id = q_{first.name}.id" for v in unbound[1:])
        from_ = f"q_{first.name}{joins}"
    else:
        from_ = "seq"
    conds = [_cmp_sql(c, bexpr) for c in rule.var_var_comparisons]
    where = f"\nWHERE {' AND '.join(conds)}" if conds else ""
    bind = (f"CREATE TEMPORARY TABLE {r}_bind AS\nWITH RECURSIVE\n  "
            + ",\n  ".join(ctes) + f"\nSELECT {select}\nFROM {from_}{where};")

    # 2. der
    head = rule.base.head.args
    if query.rules and len(head):
        match = " AND ".join(
            f"ans.c{i} = {'b.' + ident(a.name) if isinstance(a, Var) else literal(a)}"
            for i, a in enumerate(head))
    else:
        match = "1 = 1"
    der = (f"CREATE TEMPORARY TABLE {r}_der AS\nWITH ans AS (\n  {answers_sql(query, db)}\n)\n"
           f"SELECT b.* FROM {r}_bind AS b\nWHERE NOT EXISTS (SELECT 1 FROM ans WHERE {match});")

    # 3. sample
    flags, joins = [], []
    for n, g in enumerate(rule.base.literals, 1):
        rel_cols = db[g.relation].columns
        if not rel_cols:
            raise SQLGenError(f"relation {g.relation} has no columns")
        alias = f"t{n}"
        on = " AND ".join(
            f"{alias}.{ident(rel_cols[i])} = {'d.' + ident(a.name) if isinstance(a, Var) else literal(a)}"
            for i, a in enumerate(g.args))
        joins.append(f"LEFT JOIN {ident(g.relation)} AS {alias} ON {on}")
        hit, miss = ("0", "1") if g.negated else ("1", "0")
        # a negated goal succeeds when the outer join finds nothing
        flags.append(f"CASE WHEN {alias}.{ident(rel_cols[0])} IS NULL THEN {miss} ELSE {hit} END "
                     f"AS {_flag_name(n)}")
    inner_cols = ", ".join([f"d.{c}" for c in cols] + flags)
    sample = (f"CREATE TEMPORARY TABLE {r}_sample AS\n"
              f"SELECT ROW_NUMBER() OVER () AS _sid, s.* FROM (\n"
              f"  SELECT * FROM (\n    SELECT DISTINCT {inner_cols}\n    FROM {r}_der AS d\n    "
              + "\n    ".join(joins)
              + f"\n  ) AS x ORDER BY RANDOM() LIMIT {s_param}\n) AS s;")

    # 4. lca
    flag_cols = [_flag_name(n) for n in range(1, len(rule.base.literals) + 1)]
    lca_cols = ", ".join(
        [f"CASE WHEN a.{c} = b.{c} THEN a.{c} ELSE NULL END AS {c}" for c in cols]
        + [f"a.{f}" for f in flag_cols])
    same = " AND ".join(["a._sid <= b._sid"] + [f"a.{f} = b.{f}" for f in flag_cols])
    lca = (f"CREATE TEMPORARY TABLE {r}_lca AS\nSELECT DISTINCT {lca_cols}\n"
           f"FROM {r}_sample AS a JOIN {r}_sample AS b ON {same};")

    # 5. match
    keys = [f"p.{c}" for c in cols] + [f"p.{f}" for f in flag_cols]
    on = " AND ".join([f"(p.{c} IS NULL OR p.{c} = s.{c})" for c in cols]
                      + [f"p.{f} = s.{f}" for f in flag_cols]) or "1 = 1"
    match_sql = (f"CREATE TEMPORARY TABLE {r}_match AS\n"
                 f"SELECT {', '.join(keys)}, COUNT(*) AS matches\n"
                 f"FROM {r}_lca AS p JOIN {r}_sample AS s ON {on}\n"
                 f"GROUP BY {', '.join(keys)};")
    return [bind, der, sample, lca, match_sql]


def emit_sql(query: Query, db: Database, question: ProvenanceQuestion,
             n_os: Mapping[str, int] | None = None,
             sample_size: Mapping[str, int] | int | None = None,
             overrides: DomainOverrides | None = None) -> str:
    """SQL script for a why-not question, one pipeline per contributing rule."""
    if question.qtype is not QuestionType.WHYNOT:
        raise SQLGenError("SQL emission covers why-not questions only")
    out = [f"-- question: {question}",
           "-- completeness of a pattern = matches / total rows over all <rule>_sample tables"]
    for rule in unify_query(query, question.ptuple):
        try:
            rule_domains(rule, db, overrides)
        except EmptyDomainError:
            out.append(f"-- rule {rule.rule_id}: empty variable domain, no derivations")
            continue
        size = sample_size.get(rule.rule_id) if isinstance(sample_size, Mapping) else sample_size
        out.append(f"\n-- rule {rule.rule_id}: {rule}")
        out.extend(rule_pipeline(rule, query, db, (n_os or {}).get(rule.rule_id), size, overrides))
    return "\n\n".join(out) + "\n"


def load_into_sqlite(db: Database, conn: sqlite3.Connection | None = None) -> sqlite3.Connection:
    """Copy a database into SQLite tables (for running emitted SQL)."""
    conn = conn or sqlite3.connect(":memory:")
    for rel in db:
        decl = ", ".join(f"{ident(c)} {'INTEGER' if t == 'int' else 'TEXT'}"
                         for c, t in zip(rel.columns, rel.types))
        conn.execute(f"CREATE TABLE {ident(rel.name)} ({decl})")
        marks = ", ".join("?" for _ in rel.columns)
        conn.executemany(f"INSERT INTO {ident(rel.name)} VALUES ({marks})", sorted(rel.rows, key=repr))
    return conn
