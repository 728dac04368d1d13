"""Synthetic instances for property tests and scaling checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datalog import ProvenanceQuestion, Query, parse_program, parse_question
from .relstore import Database, Relation


@dataclass
class Instance:
    query: Query
    db: Database
    question: ProvenanceQuestion


def _relation(name: str, cols: tuple[str, ...], rows) -> Relation:
    return Relation(name, cols, ("int",) * len(cols), frozenset(tuple(int(v) for v in r) for r in rows))


SMALL_PROGRAMS = (
    "Q(X,Y) :- R(X,Z), R(Z,Y), X < Y.",
    "Q(X,Y) :- R(X,Y), not S(Y,X).",
    "Q(X,Y) :- R(X,Z), S(Z,Y), Z != X.",
    "Q(X,Y) :- R(X,Y).\nQ(X,Y) :- S(X,Z), R(Z,Y).",
    "Q(X,Y) :- S(X,Y), R(Y,Z), not R(Z,X).",
)


def small_instance(seed: int, values: int = 4, density: float = 0.35,
                   program: int | None = None) -> Instance:
    """A random two-relation instance small enough for exhaustive checks.

    Every value 0..values-1 occurs in every column so that active domains
    coincide with the value range.
    """
    rng = np.random.default_rng(seed)
    rels = []
    for name, cols in (("R", ("A", "B")), ("S", ("B", "C"))):
        rows = {(a, b) for a in range(values) for b in range(values) if rng.random() < density}
        perm = rng.permutation(values)
        rows |= {(i, int(perm[i])) for i in range(values)}
        rels.append(_relation(name, cols, rows))
    db = Database(rels)
    text = SMALL_PROGRAMS[program if program is not None else int(rng.integers(len(SMALL_PROGRAMS)))]
    query = parse_program(text)
    shape = int(rng.integers(3))
    c = int(rng.integers(values))
    arg = {0: f"Q({c},Y)", 1: f"Q(X,{c})", 2: "Q(X,Y)"}[shape]
    return Instance(query, db, parse_question(f"WHYNOT {arg}"))


def medium_instance(seed: int = 0, n_x: int = 30, n_y: int = 20, n_z: int = 20,
                    live_x: int = 5, live_y: int = 5) -> Instance:
    """About 10^4 why-not derivations with all four annotation classes.

    ``Q(X) :- R(X,Y), S(Y,Z)``.  Only the first ``live_x`` values of X reach a
    Y that has S tuples, so the other X values are missing answers and all of
    their derivations belong to the why-not provenance.
    """
    rng = np.random.default_rng(seed)
    r_rows = set()
    for x in range(n_x):
        ys = range(live_y) if x < live_x else range(live_y, n_y)
        r_rows |= {(x, y) for y in ys if rng.random() < 0.3}
        r_rows.add((x, live_y + x % (n_y - live_y)) if x >= live_x else (x, x % live_y))
    # every Y value occurs in R.B without linking a missing X to a live Y
    r_rows |= {(int(rng.integers(live_x)) if y < live_y else int(rng.integers(live_x, n_x)), y)
               for y in range(n_y)}
    s_rows = {(y, z) for y in range(live_y) for z in range(n_z) if rng.random() < 0.4}
    s_rows |= {(z % live_y, z) for z in range(n_z)}
    db = Database([_relation("R", ("A", "B"), r_rows), _relation("S", ("B", "C"), s_rows)])
    query = parse_program("Q(X) :- R(X,Y), S(Y,Z).")
    return Instance(query, db, parse_question("WHYNOT Q(X)"))


def chain_instance(length: int = 8, domain: int = 10_000, seed: int = 0) -> Instance:
    """``Q(X0,Xn) :- R1(X0,X1), ..., Rn(Xn-1,Xn)`` over permutation relations.

    Each relation holds ``domain`` rows whose columns are both permutations of
    0..domain-1, so every attribute has exactly ``domain`` distinct values and
    the derivation space of ``WHYNOT Q(X0,Xn)`` is ``domain ** (length + 1)``.
    """
    rng = np.random.default_rng(seed)
    rels = []
    base = np.arange(domain)
    for i in range(1, length + 1):
        rows = zip(base.tolist(), rng.permutation(domain).tolist())
        rels.append(_relation(f"R{i}", ("A", "B"), rows))
    body = ", ".join(f"R{i}(X{i - 1},X{i})" for i in range(1, length + 1))
    query = parse_program(f"Q(X0,X{length}) :- {body}.")
    return Instance(query, Database(rels), parse_question(f"WHYNOT Q(X0,X{length})"))
