import pytest
from hypothesis import given, settings, strategies as st

from provsumm.datalog import (
    Comparator,
    Comparison,
    DatalogError,
    DatalogSyntaxError,
    Literal,
    PTuple,
    Query,
    QuestionType,
    Rule,
    Atom,
    SafetyError,
    Var,
    check_ptuple,
    compare,
    format_program,
    matches_ptuple,
    parse_program,
    parse_ptuple,
    parse_question,
    unify_query,
    unify_with_ptuple,
)

X, Y, Z = Var("X"), Var("Y"), Var("Z")


def test_parse_running_example():
    q = parse_program("Q(X,Y) :- R(X,Z), R(Z,Y), X < Y.")
    assert len(q.rules) == 1
    r = q.rules[0]
    assert r.id == "r1"
    assert r.variable_order == (X, Y, Z)
    assert r.literals == (Literal("R", (X, Z)), Literal("R", (Z, Y)))
    assert r.comparisons == (Comparison(Comparator.LT, X, Y),)


def test_parse_airbnb_rule_variable_order():
    q = parse_program("AL(N,R) :- L(I,N,T,R,'queen anne',E), A(I,'2016-11-09',P).")
    assert [v.name for v in q.rules[0].variable_order] == ["N", "R", "I", "T", "E", "P"]
    assert q.rules[0].literals[0].args[4] == "queen anne"


def test_safety_names_variable():
    with pytest.raises(SafetyError) as e:
        parse_program("Q(X) :- not R(X,Y).")
    assert e.value.variable in ("X", "Y")
    with pytest.raises(SafetyError) as e:
        parse_program("Q(X) :- S(X), not R(X,Y).")
    assert e.value.variable == "Y"


def test_comparison_only_variable_is_unsafe():
    with pytest.raises(SafetyError):
        parse_program("Q(X) :- R(X), Y < 3.")


@pytest.mark.parametrize("text,line,column", [
    ("Q(X) :- R(X)", 1, 13),
    ("Q(X) :- R(X).\nQ(X) :- R(X) S(X).", 2, 14),
    ("Q(X) :- R(x).", 1, 11),
    ("Q(X) :- R(X) ; S(X).", 1, 14),
])
def test_syntax_error_position(text, line, column):
    with pytest.raises(DatalogSyntaxError) as e:
        parse_program(text)
    assert (e.value.line, e.value.column) == (line, column)


def test_mixed_heads_rejected():
    with pytest.raises(DatalogError):
        parse_program("Q(X) :- R(X).\nP(X) :- R(X).")
    with pytest.raises(DatalogError):
        parse_program("Q(X) :- R(X).\nQ(X,Y) :- R(X), R(Y).")


def test_idb_in_body_rejected():
    with pytest.raises(DatalogError):
        parse_program("Q(X) :- R(X), Q(X).")


def test_inconsistent_arity_rejected():
    with pytest.raises(DatalogError):
        parse_program("Q(X) :- R(X), R(X,X).")


def test_ground_comparison_type_error():
    with pytest.raises(DatalogError):
        parse_program("Q(X) :- R(X), 1 < 'a'.")


def test_comments_unicode_and_multiple_rules():
    q = parse_program("""
        % first rule
        Q(X) :- R(X,Y), Y ≤ 3.   # trailing comment
        Q(X) :- S(X), not R(X,X), X ≠ 'b'.
    """)
    assert [r.id for r in q.rules] == ["r1", "r2"]
    assert q.rules[0].comparisons[0].op is Comparator.LE
    assert q.rules[1].literals[1].negated
    assert q.rules[1].comparisons[0].right == "b"
    assert q.relations() == {"R": 2, "S": 1}


def test_compare_types():
    assert compare(Comparator.LT, 2, 4)
    assert compare(Comparator.LT, "apt", "house")
    with pytest.raises(DatalogError):
        compare(Comparator.LT, 1, "a")


@pytest.mark.parametrize("t,pt,expected", [
    (("plum", "shared"), "AL(N, shared)", True),
    ((1, 4), "Q(X,4)", True),
    ((1, 3), "Q(X,4)", False),
    ((1, 3), "Q(X,Y)", True),
    ((1, 3), "Q(1,3)", True),
])
def test_matches_ptuple(t, pt, expected):
    assert matches_ptuple(t, parse_ptuple(pt)) is expected


def test_matches_repeated_placeholder_needs_one_constant():
    args = (X, X)
    assert matches_ptuple((2, 2), args)
    assert not matches_ptuple((2, 3), args)


def test_ptuple_placeholders_distinct():
    with pytest.raises(DatalogError):
        PTuple("Q", (X, X))


def test_matches_arity_error():
    with pytest.raises(DatalogError):
        matches_ptuple((1,), parse_ptuple("Q(X,4)"))


def test_parse_question():
    q = parse_question("WHYNOT Q(X,4)")
    assert q.qtype is QuestionType.WHYNOT
    assert q.ptuple == PTuple("Q", (X, 4))
    assert parse_question("why AL(N,'shared')").qtype is QuestionType.WHY
    with pytest.raises(DatalogSyntaxError):
        parse_question("HOW Q(X)")


def test_unify_running_example():
    r = parse_program("Q(X,Y) :- R(X,Z), R(Z,Y), X < Y.").rules[0]
    u = unify_with_ptuple(r, parse_ptuple("Q(X,4)"))
    assert u.bindings == {Y: 4}
    assert u.unbound_vars == (X, Z)
    assert u.literals[1] == Literal("R", (Z, 4))
    assert u.comparisons == (Comparison(Comparator.LT, X, 4),)
    assert str(u) == "Q(X, 4) :- R(X, Z), R(Z, 4), X < 4."


def test_unify_airbnb():
    r = parse_program("AL(N,R) :- L(I,N,T,R,'queen anne',E), A(I,'2016-11-09',P).").rules[0]
    u = unify_with_ptuple(r, parse_ptuple("AL(N,shared)"))
    assert u.bindings == {Var("R"): "shared"}
    assert [v.name for v in u.unbound_vars] == ["N", "I", "T", "E", "P"]


def test_unify_fully_constant():
    r = parse_program("Q(X,Y) :- R(X,Z), R(Z,Y), X < Y.").rules[0]
    u = unify_with_ptuple(r, parse_ptuple("Q(1,2)"))
    assert u.unbound_vars == (Z,)


@pytest.mark.parametrize("rule,pt", [
    ("Q(X,1) :- R(X).", "Q(X,2)"),
    ("Q(X,X) :- R(X).", "Q(1,2)"),
    ("Q(X,Y) :- R(X,Y), X < Y.", "Q(3,2)"),
])
def test_unify_no_contribution(rule, pt):
    assert unify_with_ptuple(parse_program(rule).rules[0], parse_ptuple(pt)) is None


def test_unify_query_skips_non_contributing_rules():
    q = parse_program("Q(X,1) :- R(X).\nQ(X,Y) :- S(X,Y).")
    rules = unify_query(q, parse_ptuple("Q(X,2)"))
    assert [r.rule_id for r in rules] == ["r2"]
    with pytest.raises(DatalogError):
        check_ptuple(q, parse_ptuple("Q(X)"))


# --- properties -------------------------------------------------------------

names = st.sampled_from(["X", "Y", "Z", "W", "V1", "Long_Name"])
consts = st.one_of(st.integers(-50, 50), st.text("ab c'\\", min_size=0, max_size=4))
terms = st.one_of(names.map(Var), consts)


@st.composite
def rules(draw, rid="r1"):
    nlits = draw(st.integers(1, 3))
    rels = ["R", "S", "T"]
    lits = []
    for i in range(nlits):
        rel = rels[i]
        args = tuple(draw(st.lists(terms, min_size=1, max_size=3)))
        lits.append(Literal(rel, args))
    pos_vars = sorted({a for l in lits for a in l.args if isinstance(a, Var)}, key=lambda v: v.name)
    body = list(lits)
    if pos_vars and draw(st.booleans()):
        v = draw(st.sampled_from(pos_vars))
        body.append(Literal("N", (v,), negated=True))
    if pos_vars and draw(st.booleans()):
        a, b = draw(st.sampled_from(pos_vars)), draw(st.sampled_from(pos_vars))
        body.append(Comparison(draw(st.sampled_from(list(Comparator))), a, b))
    head = tuple(draw(st.lists(st.sampled_from(pos_vars) if pos_vars else consts, min_size=0, max_size=3)))
    return Rule(rid, Atom("Q", head), tuple(body))


@settings(max_examples=200, deadline=None)
@given(rules())
def test_round_trip(rule):
    q = Query((rule,))
    assert parse_program(format_program(q)) == q


@settings(max_examples=200, deadline=None)
@given(rules(), st.data())
def test_unify_preserves_goal_and_variable_counts(rule, data):
    arity = len(rule.head.args)
    pt_args = tuple(data.draw(st.one_of(st.just(None), st.integers(0, 3))) for _ in range(arity))
    pt = PTuple("Q", tuple(Var(f"P{i}") if a is None else a for i, a in enumerate(pt_args)))
    u = unify_with_ptuple(rule, pt)
    if u is None:
        return
    assert len(u.literals) + len(u.comparisons) == len(rule.body)
    assert len(u.unbound_vars) + len(u.bindings) == len(rule.variable_order)
    assert set(u.unbound_vars).isdisjoint(u.bindings)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=4), st.data())
def test_matches_reflexive_and_monotone(t, data):
    t = tuple(t)
    pt = PTuple("Q", t)
    assert matches_ptuple(t, pt)
    i = data.draw(st.integers(0, len(t) - 1))
    wider = PTuple("Q", t[:i] + (Var("Fresh"),) + t[i + 1:])
    assert matches_ptuple(t, wider)
