"""Boolean and non-Boolean conjunctive queries.

Evaluation is plain backtracking in listed-atom order, which is all the
test instances need; no join reordering, no indexes beyond a per-relation
fact list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import SchemaError
from .relational import Database, Fact, Schema

__all__ = [
    "Term",
    "Variable",
    "Constant",
    "Atom",
    "ConjunctiveQuery",
    "Homomorphism",
    "homomorphisms",
    "answers",
    "entails",
]


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: str

    def __str__(self) -> str:
        return repr(self.value)


Term = Variable | Constant


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.relation}({','.join(str(t) for t in self.terms)})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """Atoms plus the tuple of answer (free) variables.

    Boolean queries have an empty answer tuple. At least one atom is
    required; the empty conjunction is not a query here.
    """

    atoms: tuple[Atom, ...]
    answer_variables: tuple[Variable, ...] = ()

    def __post_init__(self) -> None:
        if not self.atoms:
            raise SchemaError("a conjunctive query needs at least one atom")
        body_vars = {t for atom in self.atoms for t in atom.terms if isinstance(t, Variable)}
        loose = [v for v in self.answer_variables if v not in body_vars]
        if loose:
            raise SchemaError(f"answer variables {loose} do not occur in the body")

    @property
    def is_boolean(self) -> bool:
        return not self.answer_variables

    @property
    def variables(self) -> frozenset[Variable]:
        return frozenset(
            t for atom in self.atoms for t in atom.terms if isinstance(t, Variable)
        )

    def atom_count(self) -> int:
        """|Q|, the number of atoms."""
        return len(self.atoms)

    def validate(self, schema: Schema) -> None:
        for atom in self.atoms:
            if len(atom.terms) != schema.arity(atom.relation):
                raise SchemaError(
                    f"atom {atom} has arity {len(atom.terms)}, schema says "
                    f"{schema.arity(atom.relation)}"
                )

    def __str__(self) -> str:
        head = ",".join(str(v) for v in self.answer_variables)
        body = ",".join(str(a) for a in self.atoms)
        return f"Q({head}) :- {body}"


Homomorphism = Mapping[Variable, str]


def _match(atom: Atom, f: Fact, binding: dict[Variable, str]) -> dict[Variable, str] | None:
    """Extend binding so atom maps onto f, or None if impossible."""
    extended = binding
    for term, value in zip(atom.terms, f.values):
        if isinstance(term, Constant):
            if term.value != value:
                return None
        else:
            bound = extended.get(term)
            if bound is None:
                if extended is binding:
                    extended = dict(binding)
                extended[term] = value
            elif bound != value:
                return None
    return extended


def homomorphisms(q: ConjunctiveQuery, db: Database) -> Iterator[Homomorphism]:
    """All assignments of the query's variables that satisfy every atom.

    Deterministic order: atoms are matched in the order listed, candidate
    facts in canonical fact order.
    """
    q.validate(db.schema)
    by_relation = {
        atom.relation: db.facts_of(atom.relation) for atom in q.atoms
    }

    def extend(i: int, binding: dict[Variable, str]) -> Iterator[Homomorphism]:
        if i == len(q.atoms):
            yield dict(binding)
            return
        atom = q.atoms[i]
        for f in by_relation[atom.relation]:
            ext = _match(atom, f, binding)
            if ext is not None:
                yield from extend(i + 1, ext)

    return extend(0, {})


def answers(q: ConjunctiveQuery, db: Database) -> set[tuple[str, ...]]:
    """Answer tuples, i.e. projections of homomorphisms onto the answer
    variables. A satisfied Boolean query answers {()}."""
    return {
        tuple(h[v] for v in q.answer_variables) for h in homomorphisms(q, db)
    }


def entails(db: Database, q: ConjunctiveQuery, answer: tuple[str, ...] = ()) -> bool:
    """Does the database return this answer tuple for the query?"""
    if len(answer) != len(q.answer_variables):
        raise SchemaError(
            f"answer arity {len(answer)} does not match query head arity "
            f"{len(q.answer_variables)}"
        )
    q.validate(db.schema)
    by_relation = {
        atom.relation: db.facts_of(atom.relation) for atom in q.atoms
    }
    seed = dict(zip(q.answer_variables, answer))

    def extend(i: int, binding: dict[Variable, str]) -> bool:
        if i == len(q.atoms):
            return True
        atom = q.atoms[i]
        for f in by_relation[atom.relation]:
            ext = _match(atom, f, binding)
            if ext is not None and extend(i + 1, ext):
                return True
        return False

    return extend(0, seed)
