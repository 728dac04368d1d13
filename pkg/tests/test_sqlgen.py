import sqlite3
from pathlib import Path

import pytest

from provsumm.datalog import parse_program, parse_ptuple, parse_question, unify_query
from provsumm.oracle import enumerate_whynot
from provsumm.patterns import DerivationPattern, MatchIndex, generate_candidates
from provsumm.relstore import evaluate
from provsumm.sampler import AnnotatedDerivation
from provsumm.sqlgen import SQLGenError, answers_sql, emit_sql, ident, literal, load_into_sqlite, \
    rule_pipeline
from provsumm.synthetic import small_instance

GOLDEN = Path(__file__).parent / "golden" / "running_example.sql"


def run_pipeline(query, db, pt, n_os, size, overrides=None, params=None):
    conn = load_into_sqlite(db)
    out = {}
    for rule in unify_query(query, pt):
        stmts = rule_pipeline(rule, query, db, n_os, size, overrides)
        for s in stmts:
            conn.execute(s, params or {})
        out[rule.rule_id] = (rule, conn)
    return conn, out


def sample_rows(conn, rule):
    cur = conn.execute(f"SELECT * FROM {rule.rule_id}_sample")
    rows = cur.fetchall()
    nvars = len(rule.variable_order)
    return [AnnotatedDerivation(rule.rule_id, tuple(r[1:1 + nvars]), tuple(bool(g) for g in r[1 + nvars:]))
            for r in rows]


def test_golden_file(running, q_x4):
    text = emit_sql(running.query, running.db, q_x4, None, None, running.overrides)
    assert text == GOLDEN.read_text()
    assert text.count("CREATE TEMPORARY TABLE") == 5


def test_parameterised_script_runs(running, q_x4):
    conn = load_into_sqlite(running.db)
    rule = unify_query(running.query, q_x4.ptuple)[0]
    for s in rule_pipeline(rule, running.query, running.db, overrides=running.overrides):
        conn.execute(s, {"n_os_r1": 50, "sample_size_r1": 5})
    n = conn.execute("SELECT COUNT(*) FROM r1_sample").fetchone()[0]
    assert 1 <= n <= 5


def test_running_example_against_oracle(running, q_x4):
    full = enumerate_whynot(running.query, running.db, q_x4.ptuple, running.overrides)
    conn, out = run_pipeline(running.query, running.db, q_x4.ptuple, 3000, 100, running.overrides)
    rule = out["r1"][0]
    got = sample_rows(conn, rule)
    assert sorted(got, key=repr) == sorted(full.derivations, key=repr)

    lca_rows = conn.execute('SELECT * FROM r1_lca').fetchall()
    sql_patterns = {DerivationPattern("r1", tuple(r[:3]), tuple(bool(g) for g in r[3:])) for r in lca_rows}
    assert sql_patterns == set(generate_candidates(got))

    index = MatchIndex(got)
    for r in conn.execute("SELECT * FROM r1_match").fetchall():
        p = DerivationPattern("r1", tuple(r[:3]), tuple(bool(g) for g in r[3:5]))
        assert r[5] == index.count(p)


def test_sample_size_cut(running, q_x4):
    conn, out = run_pipeline(running.query, running.db, q_x4.ptuple, 3000, 4, running.overrides)
    got = sample_rows(conn, out["r1"][0])
    full = set(enumerate_whynot(running.query, running.db, q_x4.ptuple, running.overrides).derivations)
    assert len(got) == 4 and set(got) <= full


def test_airbnb_strings(airbnb, q_shared):
    full = set(enumerate_whynot(airbnb.query, airbnb.db, q_shared.ptuple).derivations)
    conn, out = run_pipeline(airbnb.query, airbnb.db, q_shared.ptuple, 500, 50)
    got = sample_rows(conn, out["r1"][0])
    assert got and set(got) <= full


def test_negated_goal_inverted():
    q = parse_program("Q(X,Y) :- R(X,Y), not S(Y,X).")
    inst = small_instance(3, program=1)
    text = rule_pipeline(unify_query(q, parse_ptuple("Q(X,Y)"))[0], q, inst.db, 10, 10)[2]
    assert "THEN 1 ELSE 0 END AS _g2" in text
    full = enumerate_whynot(q, inst.db, parse_ptuple("Q(X,Y)"))
    conn, out = run_pipeline(q, inst.db, parse_ptuple("Q(X,Y)"), 4000, 1000)
    got = sample_rows(conn, out["r1"][0])
    assert sorted(got, key=repr) == sorted(full.derivations, key=repr)


@pytest.mark.parametrize("seed", range(6))
def test_small_instances_against_oracle(seed):
    inst = small_instance(seed, values=3)
    pt = inst.question.ptuple
    full = enumerate_whynot(inst.query, inst.db, pt)
    conn, out = run_pipeline(inst.query, inst.db, pt, 3000, 1000)
    got = []
    for rule, _ in out.values():
        got += sample_rows(conn, rule)
    assert sorted(got, key=repr) == sorted(full.derivations, key=repr)


def test_multi_rule_pipelines():
    inst = small_instance(0, program=3)
    text = emit_sql(inst.query, inst.db, parse_question("WHYNOT Q(X,Y)"), {"r1": 10, "r2": 10}, 5)
    assert text.count("CREATE TEMPORARY TABLE") == 10
    assert "r1_sample" in text and "r2_sample" in text
    conn = load_into_sqlite(inst.db)
    conn.executescript(text)


def test_answers_sql_matches_evaluate(running):
    conn = load_into_sqlite(running.db)
    rows = set(conn.execute(answers_sql(running.query, running.db)).fetchall())
    assert rows == evaluate(running.query, running.db).rows


def test_why_is_unsupported(running):
    with pytest.raises(SQLGenError):
        emit_sql(running.query, running.db, parse_question("WHY Q(X,4)"))


@pytest.mark.parametrize("value,expected", [(3, "3"), ("it's", "'it''s'"), (-2, "-2")])
def test_literal(value, expected):
    assert literal(value) == expected


def test_ident_quotes():
    assert ident('a"b') == '"a""b"'


def test_script_is_valid_sqlite(running, q_x4):
    text = emit_sql(running.query, running.db, q_x4, {"r1": 20}, 3, running.overrides)
    conn = load_into_sqlite(running.db)
    conn.executescript(text)
    assert conn.execute("SELECT COUNT(*) FROM r1_match").fetchone()[0] >= 1
    assert sqlite3.complete_statement(text)
