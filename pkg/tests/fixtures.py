"""Shared worked instances used across the test modules."""

from __future__ import annotations

from opcqa import (
    Atom,
    ConjunctiveQuery,
    Constant,
    Database,
    FunctionalDependency,
    Schema,
    Variable,
    fact,
)

# ---------------------------------------------------------------------------
# Three facts under two plain FDs; the running worked example. Conflict
# graph is the path f1 - f2 - f3.
# ---------------------------------------------------------------------------

TRIPLE_SCHEMA = Schema.of(R=("A", "B", "C"))
F1 = fact("R", "a1", "b1", "c1")
F2 = fact("R", "a1", "b2", "c2")
F3 = fact("R", "a2", "b1", "c2")
TRIPLE_FDS = frozenset(
    [
        FunctionalDependency.of("R", ("A",), ("B",)),
        FunctionalDependency.of("R", ("C",), ("B",)),
    ]
)


def triple_instance() -> tuple[Database, frozenset[FunctionalDependency]]:
    return Database.of(TRIPLE_SCHEMA, [F1, F2, F3]), TRIPLE_FDS


# ---------------------------------------------------------------------------
# Six facts under one primary key; blocks of sizes 3, 1, 2.
# ---------------------------------------------------------------------------

PAIR_SCHEMA = Schema.of(R=("A1", "A2"))
KEYED_ROWS = (
    ("a1", "b1"),
    ("a1", "b2"),
    ("a1", "b3"),
    ("a2", "b1"),
    ("a3", "b1"),
    ("a3", "b2"),
)
KEYED_FDS = frozenset([FunctionalDependency.of("R", ("A1",), ("A2",))])


def keyed_instance() -> tuple[Database, frozenset[FunctionalDependency]]:
    db = Database.of(PAIR_SCHEMA, [fact("R", *row) for row in KEYED_ROWS])
    return db, KEYED_FDS


def keyed_query() -> ConjunctiveQuery:
    """Q(x) :- R(a1, x)."""
    return ConjunctiveQuery(
        (Atom("R", (Constant("a1"), Variable("x"))),), (Variable("x"),)
    )


def keyed_boolean_query() -> ConjunctiveQuery:
    """Q() :- R(a1, b1)."""
    return ConjunctiveQuery((Atom("R", (Constant("a1"), Constant("b1"))),))


# ---------------------------------------------------------------------------
# Three facts under two keys of one binary relation; path conflict graph
# without being a single block. The smallest connected non-clique key
# instance feedable to the lift construction.
# ---------------------------------------------------------------------------

TWO_KEY_FDS = frozenset(
    [
        FunctionalDependency.of("R", ("A1",), ("A2",)),
        FunctionalDependency.of("R", ("A2",), ("A1",)),
    ]
)


def two_key_path_instance() -> tuple[Database, frozenset[FunctionalDependency]]:
    db = Database.of(
        PAIR_SCHEMA,
        [fact("R", "a1", "b1"), fact("R", "a1", "b2"), fact("R", "a2", "b2")],
    )
    return db, TWO_KEY_FDS
