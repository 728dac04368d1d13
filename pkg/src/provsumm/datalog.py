"""Datalog front end for UCQ queries with negation and comparisons.

A program is a non-empty list of rules sharing one head predicate.  Bodies
hold positive literals, negated literals (``not R(...)``) and binary
comparisons.  Terms are variables (upper-case initial), integer literals or
quoted strings.  Everything here is immutable.

Grammar::

    program    := rule*
    rule       := atom ":-" goal ("," goal)* "."
    goal       := ["not"] atom | term CMP term
    atom       := NAME "(" [term ("," term)*] ")"
    term       := VAR | INT | STRING
    CMP        := "<" | "<=" | "!=" | ">=" | ">"      (also ≤ ≠ ≥)

``%`` and ``#`` start comments that run to the end of the line.
"""
from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence, Union

Constant = Union[int, str]

VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")


class DatalogError(ValueError):
    """Raised for malformed or invalid programs and questions."""

    code = "datalog_error"


class DatalogSyntaxError(DatalogError):
    code = "syntax_error"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class SafetyError(DatalogError):
    code = "unsafe_rule"

    def __init__(self, rule_id: str, variable: str):
        super().__init__(
            f"rule {rule_id} is unsafe: variable {variable} does not occur "
            "in a positive literal"
        )
        self.rule_id = rule_id
        self.variable = variable


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not VAR_RE.match(self.name):
            raise DatalogError(f"invalid variable name {self.name!r}")

    def __str__(self) -> str:
        return self.name


Term = Union[Var, int, str]


def is_var(term) -> bool:
    return isinstance(term, Var)


def format_constant(value: Constant) -> str:
    if isinstance(value, bool):
        raise DatalogError("booleans are not Datalog constants")
    if isinstance(value, int):
        return str(value)
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_term(term: Term) -> str:
    return term.name if isinstance(term, Var) else format_constant(term)


class Comparator(Enum):
    LT = "<"
    LE = "<="
    NE = "!="
    GE = ">="
    GT = ">"

    @property
    def func(self) -> Callable[[Constant, Constant], bool]:
        return _CMP_FUNCS[self]

    @property
    def flipped(self) -> Comparator:
        """The comparator obtained by swapping the two operands."""
        return _CMP_FLIP[self]


_CMP_FUNCS = {
    Comparator.LT: operator.lt,
    Comparator.LE: operator.le,
    Comparator.NE: operator.ne,
    Comparator.GE: operator.ge,
    Comparator.GT: operator.gt,
}
_CMP_FLIP = {
    Comparator.LT: Comparator.GT,
    Comparator.LE: Comparator.GE,
    Comparator.NE: Comparator.NE,
    Comparator.GE: Comparator.LE,
    Comparator.GT: Comparator.LT,
}


def compare(op: Comparator, left: Constant, right: Constant) -> bool:
    if isinstance(left, int) != isinstance(right, int):
        raise DatalogError(f"cannot compare {left!r} with {right!r}")
    return op.func(left, right)


@dataclass(frozen=True)
class Literal:
    relation: str
    args: tuple[Term, ...]
    negated: bool = False

    def variables(self) -> Iterator[Var]:
        return (a for a in self.args if isinstance(a, Var))

    def __str__(self) -> str:
        body = f"{self.relation}({', '.join(format_term(a) for a in self.args)})"
        return f"not {body}" if self.negated else body


@dataclass(frozen=True)
class Comparison:
    op: Comparator
    left: Term
    right: Term

    @property
    def args(self) -> tuple[Term, Term]:
        return (self.left, self.right)

    def variables(self) -> Iterator[Var]:
        return (a for a in self.args if isinstance(a, Var))

    @property
    def is_var_var(self) -> bool:
        return isinstance(self.left, Var) and isinstance(self.right, Var)

    def holds(self, valuation: dict[Var, Constant]) -> bool:
        left = valuation[self.left] if isinstance(self.left, Var) else self.left
        right = valuation[self.right] if isinstance(self.right, Var) else self.right
        return compare(self.op, left, right)

    def __str__(self) -> str:
        return f"{format_term(self.left)} {self.op.value} {format_term(self.right)}"


Goal = Union[Literal, Comparison]


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(format_term(a) for a in self.args)})"


def _first_occurrence(terms: Iterable[Term]) -> tuple[Var, ...]:
    seen: dict[Var, None] = {}
    for t in terms:
        if isinstance(t, Var):
            seen.setdefault(t, None)
    return tuple(seen)


@dataclass(frozen=True)
class Rule:
    id: str
    head: Atom
    body: tuple[Goal, ...]
    variable_order: tuple[Var, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        terms = list(self.head.args)
        for g in self.body:
            terms.extend(g.args)
        object.__setattr__(self, "variable_order", _first_occurrence(terms))
        positive = {v for g in self.literals if not g.negated for v in g.variables()}
        for v in self.variable_order:
            if v not in positive:
                raise SafetyError(self.id, v.name)
        for c in self.comparisons:
            if not (isinstance(c.left, Var) or isinstance(c.right, Var)):
                # ground comparisons are legal but must be type-consistent
                compare(c.op, c.left, c.right)

    @property
    def literals(self) -> tuple[Literal, ...]:
        return tuple(g for g in self.body if isinstance(g, Literal))

    @property
    def comparisons(self) -> tuple[Comparison, ...]:
        return tuple(g for g in self.body if isinstance(g, Comparison))

    def __str__(self) -> str:
        return f"{self.head} :- {', '.join(str(g) for g in self.body)}."


@dataclass(frozen=True)
class Query:
    rules: tuple[Rule, ...]

    def __post_init__(self):
        if not self.rules:
            raise DatalogError("a query needs at least one rule")
        head = self.rules[0].head
        arities: dict[str, int] = {}
        for r in self.rules:
            if (r.head.predicate, len(r.head.args)) != (head.predicate, len(head.args)):
                raise DatalogError(
                    f"rule {r.id} derives {r.head.predicate}/{len(r.head.args)} but "
                    f"the query derives {head.predicate}/{len(head.args)}"
                )
            for lit in r.literals:
                if lit.relation == head.predicate:
                    raise DatalogError(
                        f"rule {r.id} uses the head predicate {lit.relation} in its body"
                    )
                known = arities.setdefault(lit.relation, len(lit.args))
                if known != len(lit.args):
                    raise DatalogError(
                        f"relation {lit.relation} used with arities {known} and {len(lit.args)}"
                    )
        if len({r.id for r in self.rules}) != len(self.rules):
            raise DatalogError("rule ids must be unique")

    @property
    def head_predicate(self) -> str:
        return self.rules[0].head.predicate

    @property
    def head_arity(self) -> int:
        return len(self.rules[0].head.args)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def relations(self) -> dict[str, int]:
        """EDB relations referenced by the query, with their arities."""
        out: dict[str, int] = {}
        for r in self.rules:
            for lit in r.literals:
                out.setdefault(lit.relation, len(lit.args))
        return out

    def __str__(self) -> str:
        return format_program(self)


def format_program(query: Query) -> str:
    return "".join(f"{r}\n" for r in query.rules)


# --------------------------------------------------------------------------
# p-tuples and questions


class QuestionType(Enum):
    WHY = "WHY"
    WHYNOT = "WHYNOT"


@dataclass(frozen=True)
class PTuple:
    """A head tuple whose arguments are constants or placeholders (``Var``)."""

    predicate: str
    args: tuple[Term, ...]

    def __post_init__(self):
        names = [a.name for a in self.args if isinstance(a, Var)]
        if len(names) != len(set(names)):
            raise DatalogError(f"placeholders must be distinct in {self}")

    @property
    def constant_count(self) -> int:
        return sum(1 for a in self.args if not isinstance(a, Var))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(format_term(a) for a in self.args)})"


@dataclass(frozen=True)
class ProvenanceQuestion:
    ptuple: PTuple
    qtype: QuestionType

    def __str__(self) -> str:
        return f"{self.qtype.value} {self.ptuple}"


def matches_ptuple(t: Sequence[Constant], pt: PTuple | Sequence[Term]) -> bool:
    """True iff some valuation of the placeholders of ``pt`` yields ``t``."""
    args = pt.args if isinstance(pt, PTuple) else tuple(pt)
    if len(t) != len(args):
        raise DatalogError(f"arity mismatch: {len(t)} vs {len(args)}")
    nu: dict[Var, Constant] = {}
    for value, a in zip(t, args):
        if isinstance(a, Var):
            if nu.setdefault(a, value) != value:
                return False
        elif a != value:
            return False
    return True


# --------------------------------------------------------------------------
# unification with p-tuples


@dataclass(frozen=True)
class UnifiedRule:
    """A rule with head variables bound to the constants of a p-tuple.

    ``literals`` and ``comparisons`` are the base rule's goals with bound
    variables replaced by their constants; goal counts never change.
    """

    base: Rule
    bindings: dict[Var, Constant]
    unbound_vars: tuple[Var, ...]
    literals: tuple[Literal, ...]
    comparisons: tuple[Comparison, ...]

    def __hash__(self):
        return hash((self.base, tuple(sorted((v.name, str(c)) for v, c in self.bindings.items()))))

    @property
    def rule_id(self) -> str:
        return self.base.id

    @property
    def variable_order(self) -> tuple[Var, ...]:
        return self.base.variable_order

    @property
    def head_args(self) -> tuple[Term, ...]:
        return tuple(self.bindings.get(a, a) if isinstance(a, Var) else a
                     for a in self.base.head.args)

    def var_const_comparisons(self, var: Var) -> list[tuple[Comparator, Constant]]:
        """Comparisons of ``var`` against a constant, normalised to ``var OP c``."""
        out = []
        for c in self.comparisons:
            if c.left == var and not isinstance(c.right, Var):
                out.append((c.op, c.right))
            elif c.right == var and not isinstance(c.left, Var):
                out.append((c.op.flipped, c.left))
        return out

    @property
    def var_var_comparisons(self) -> tuple[Comparison, ...]:
        return tuple(c for c in self.comparisons if c.is_var_var)

    def full_args(self, unbound_values: Sequence[Constant]) -> tuple[Constant, ...]:
        """Arguments in ``variable_order`` given values for ``unbound_vars``."""
        nu = dict(zip(self.unbound_vars, unbound_values))
        nu.update(self.bindings)
        return tuple(nu[v] for v in self.variable_order)

    def __str__(self) -> str:
        head = Atom(self.base.head.predicate, self.head_args)
        body = [str(g) for g in self.literals + self.comparisons]
        return f"{head} :- {', '.join(body)}."


def _substitute(term: Term, bindings: dict[Var, Constant]) -> Term:
    return bindings.get(term, term) if isinstance(term, Var) else term


def unify_with_ptuple(rule: Rule, pt: PTuple) -> UnifiedRule | None:
    """Bind head variables of ``rule`` at the constant positions of ``pt``.

    Returns None when the rule cannot derive any tuple matching ``pt``: a
    rule constant in the head disagrees with ``pt``, a repeated head variable
    would need two constants, or a comparison becomes ground and false.
    """
    if (pt.predicate, len(pt.args)) != (rule.head.predicate, len(rule.head.args)):
        raise DatalogError(f"{pt} does not target the head of rule {rule.id}")
    bindings: dict[Var, Constant] = {}
    for h, p in zip(rule.head.args, pt.args):
        if isinstance(p, Var):
            continue
        if isinstance(h, Var):
            if bindings.setdefault(h, p) != p:
                return None
        elif h != p:
            return None
    literals = tuple(
        Literal(g.relation, tuple(_substitute(a, bindings) for a in g.args), g.negated)
        for g in rule.literals
    )
    comparisons = []
    for c in rule.comparisons:
        cc = Comparison(c.op, _substitute(c.left, bindings), _substitute(c.right, bindings))
        if not (isinstance(cc.left, Var) or isinstance(cc.right, Var)):
            if not compare(cc.op, cc.left, cc.right):
                return None
        comparisons.append(cc)
    unbound = tuple(v for v in rule.variable_order if v not in bindings)
    return UnifiedRule(rule, bindings, unbound, literals, tuple(comparisons))


def unify_query(query: Query, pt: PTuple) -> list[UnifiedRule]:
    """Unified versions of every rule that can contribute derivations for ``pt``."""
    check_ptuple(query, pt)
    out = []
    for r in query.rules:
        u = unify_with_ptuple(r, pt)
        if u is not None:
            out.append(u)
    return out


def check_ptuple(query: Query, pt: PTuple) -> None:
    if pt.predicate != query.head_predicate or len(pt.args) != query.head_arity:
        raise DatalogError(
            f"{pt} does not match the query head "
            f"{query.head_predicate}/{query.head_arity}"
        )


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>[%\#][^\n]*)
  | (?P<imp>:-)
  | (?P<cmp><=|>=|!=|≤|≥|≠|<|>)
  | (?P<int>-?\d+)
  | (?P<str>'(?:[^'\\\n]|\\.)*'|"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.])
    """,
    re.VERBOSE,
)
_UNICODE_CMP = {"≤": "<=", "≥": ">=", "≠": "!="}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DatalogSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str, bare_strings: bool = False):
        self.toks = _tokenize(text)
        self.i = 0
        # questions accept unquoted lower-case words as string constants
        self.bare_strings = bare_strings

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> DatalogSyntaxError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return DatalogSyntaxError(f"{msg}, found {found!r}", tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self.error(f"expected {text or kind}")
        self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return int(tok.text)
        if tok.kind == "str":
            self.i += 1
            return _unquote(tok.text)
        if tok.kind == "name":
            if VAR_RE.match(tok.text):
                self.i += 1
                return Var(tok.text)
            if self.bare_strings:
                self.i += 1
                return tok.text
            raise self.error("constants in rules must be integers or quoted strings")
        raise self.error("expected a term")

    def atom(self) -> Atom:
        name = self.expect("name")
        self.expect("punct", "(")
        args = []
        if not self.at("punct", ")"):
            args.append(self.term())
            while self.at("punct", ","):
                self.i += 1
                args.append(self.term())
        self.expect("punct", ")")
        return Atom(name.text, tuple(args))

    def goal(self) -> Goal:
        if self.at("name", "not") and self.toks[self.i + 1].kind == "name":
            self.i += 1
            a = self.atom()
            return Literal(a.predicate, a.args, negated=True)
        if self.at("name") and self.toks[self.i + 1].kind == "punct" and self.toks[self.i + 1].text == "(":
            a = self.atom()
            return Literal(a.predicate, a.args)
        left = self.term()
        op_tok = self.expect("cmp")
        right = self.term()
        return Comparison(Comparator(_UNICODE_CMP.get(op_tok.text, op_tok.text)), left, right)

    def rule(self, rule_id: str) -> Rule:
        start = self.tok
        head = self.atom()
        self.expect("imp")
        body = [self.goal()]
        while self.at("punct", ","):
            self.i += 1
            body.append(self.goal())
        self.expect("punct", ".")
        try:
            return Rule(rule_id, head, tuple(body))
        except SafetyError:
            raise
        except DatalogError as e:
            raise DatalogSyntaxError(str(e), start.line, start.col) from None


def parse_program(text: str) -> Query:
    """Parse Datalog source into a validated :class:`Query` (rule ids r1, r2, ...)."""
    p = _Parser(text)
    rules = []
    while not p.at("eof"):
        rules.append(p.rule(f"r{len(rules) + 1}"))
    if not rules:
        raise DatalogSyntaxError("empty program", p.tok.line, p.tok.col)
    return Query(tuple(rules))


def parse_ptuple(text: str) -> PTuple:
    p = _Parser(text, bare_strings=True)
    a = p.atom()
    p.expect("eof")
    return PTuple(a.predicate, a.args)


def parse_question(text: str) -> ProvenanceQuestion:
    """Parse ``WHY P(a, X)`` or ``WHYNOT P(a, X)``."""
    stripped = text.strip()
    kind, _, rest = stripped.partition(" ")
    try:
        qtype = QuestionType(kind.upper())
    except ValueError:
        raise DatalogSyntaxError("a question starts with WHY or WHYNOT", 1, 1) from None
    return ProvenanceQuestion(parse_ptuple(rest), qtype)
