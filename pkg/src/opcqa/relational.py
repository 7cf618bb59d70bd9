"""Relational instances and their integrity constraints.

Everything downstream (repairing sequences, counting, sampling) works on
the value types defined here: schemas, facts, databases, functional
dependencies, violation sets, conflict graphs, and blocks. All types are
immutable and hashable so they can be used as dictionary keys and set
members throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator

from .errors import ConstraintClassError, SchemaError, SizeCapError

__all__ = [
    "Schema",
    "Fact",
    "Database",
    "FunctionalDependency",
    "ViolationSet",
    "ConflictGraph",
    "Block",
    "satisfies",
    "violations",
    "conflict_graph",
    "blocks",
    "count_independent_sets",
    "is_nontrivially_connected",
]

DEFAULT_IS_CAP = 24


@dataclass(frozen=True)
class Schema:
    """Relation names with their ordered attribute lists.

    Stored as a tuple of (name, attributes) pairs to stay hashable;
    lookup goes through a cached mapping.
    """

    relations: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.relations]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate relation names in schema")
        for name, attrs in self.relations:
            if not attrs:
                raise SchemaError(f"relation {name} has no attributes")
            if len(attrs) != len(set(attrs)):
                raise SchemaError(f"relation {name} repeats an attribute name")

    @classmethod
    def of(cls, **relations: Iterable[str]) -> "Schema":
        """Convenience constructor: Schema.of(R=("A", "B"))."""
        return cls(tuple((name, tuple(attrs)) for name, attrs in relations.items()))

    @cached_property
    def _by_name(self) -> dict[str, tuple[str, ...]]:
        return {name: attrs for name, attrs in self.relations}

    def attributes(self, relation: str) -> tuple[str, ...]:
        try:
            return self._by_name[relation]
        except KeyError:
            raise SchemaError(f"unknown relation {relation!r}") from None

    def arity(self, relation: str) -> int:
        return len(self.attributes(relation))

    def has_relation(self, relation: str) -> bool:
        return relation in self._by_name

    def attribute_index(self, relation: str, attribute: str) -> int:
        attrs = self.attributes(relation)
        try:
            return attrs.index(attribute)
        except ValueError:
            raise SchemaError(
                f"relation {relation!r} has no attribute {attribute!r}"
            ) from None


@dataclass(frozen=True, order=True)
class Fact:
    """A single tuple of a relation. Constants are opaque strings."""

    relation: str
    values: tuple[str, ...]

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        """Canonical sort key: relation name, then the value tuple."""
        return (self.relation, self.values)

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.values)})"


def fact(relation: str, *values: str) -> Fact:
    return Fact(relation, tuple(str(v) for v in values))


@dataclass(frozen=True)
class Database:
    """A schema plus a duplicate-free set of facts."""

    schema: Schema
    facts: frozenset[Fact]

    def __post_init__(self) -> None:
        for f in self.facts:
            if len(f.values) != self.schema.arity(f.relation):
                raise SchemaError(
                    f"fact {f} has arity {len(f.values)}, schema says "
                    f"{self.schema.arity(f.relation)}"
                )

    @classmethod
    def of(cls, schema: Schema, facts: Iterable[Fact]) -> "Database":
        return cls(schema, frozenset(facts))

    @property
    def sorted_facts(self) -> tuple[Fact, ...]:
        return tuple(sorted(self.facts))

    @property
    def fact_count(self) -> int:
        """|D|, the number of facts."""
        return len(self.facts)

    @property
    def encoded_size(self) -> int:
        """||D||, the character count of the canonical serialization."""
        return sum(len(str(f)) for f in self.sorted_facts)

    @property
    def adom(self) -> frozenset[str]:
        return frozenset(v for f in self.facts for v in f.values)

    def restrict(self, facts: Iterable[Fact]) -> "Database":
        """Same schema, different fact set."""
        return Database(self.schema, frozenset(facts))

    def facts_of(self, relation: str) -> list[Fact]:
        return sorted(f for f in self.facts if f.relation == relation)

    def __contains__(self, f: Fact) -> bool:
        return f in self.facts

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.sorted_facts)


@dataclass(frozen=True)
class FunctionalDependency:
    """R: X -> Y. Facts of R agreeing on X must agree on Y."""

    relation: str
    lhs: frozenset[str]
    rhs: frozenset[str]

    def __post_init__(self) -> None:
        if not self.lhs:
            raise SchemaError("FD left-hand side must be non-empty")

    @classmethod
    def of(cls, relation: str, lhs: Iterable[str], rhs: Iterable[str]) -> "FunctionalDependency":
        return cls(relation, frozenset(lhs), frozenset(rhs))

    def validate(self, schema: Schema) -> None:
        attrs = set(schema.attributes(self.relation))
        unknown = (self.lhs | self.rhs) - attrs
        if unknown:
            raise SchemaError(
                f"FD on {self.relation} uses unknown attributes {sorted(unknown)}"
            )

    def is_key(self, schema: Schema) -> bool:
        return self.lhs | self.rhs == set(schema.attributes(self.relation))

    def lhs_indices(self, schema: Schema) -> tuple[int, ...]:
        return tuple(
            schema.attribute_index(self.relation, a) for a in sorted(self.lhs)
        )

    def rhs_indices(self, schema: Schema) -> tuple[int, ...]:
        return tuple(
            schema.attribute_index(self.relation, a) for a in sorted(self.rhs)
        )

    def violated_by(self, f: Fact, g: Fact, schema: Schema) -> bool:
        """True iff the (unordered) pair {f, g} falsifies this FD."""
        if f == g or f.relation != self.relation or g.relation != self.relation:
            return False
        if any(f.values[i] != g.values[i] for i in self.lhs_indices(schema)):
            return False
        return any(f.values[i] != g.values[i] for i in self.rhs_indices(schema))

    def __str__(self) -> str:
        lhs = ",".join(sorted(self.lhs))
        rhs = ",".join(sorted(self.rhs))
        return f"{self.relation}: {lhs} -> {rhs}"


def is_keys(sigma: Iterable[FunctionalDependency], schema: Schema) -> bool:
    return all(fd.is_key(schema) for fd in sigma)


def is_primary_keys(sigma: Iterable[FunctionalDependency], schema: Schema) -> bool:
    """At most one FD per relation, and every FD is a key."""
    seen: set[str] = set()
    for fd in sigma:
        if not fd.is_key(schema):
            return False
        if fd.relation in seen:
            return False
        seen.add(fd.relation)
    return True


@dataclass(frozen=True)
class ViolationSet:
    """All (fd, {f, g}) pairs currently falsified."""

    entries: frozenset[tuple[FunctionalDependency, frozenset[Fact]]]

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def pairs(self) -> frozenset[frozenset[Fact]]:
        """Violating fact pairs, FDs forgotten."""
        return frozenset(pair for _, pair in self.entries)


def _validated(db: Database, sigma: Iterable[FunctionalDependency]) -> list[FunctionalDependency]:
    fds = list(sigma)
    for fd in fds:
        fd.validate(db.schema)
    return fds


def violations(db: Database, sigma: Iterable[FunctionalDependency]) -> ViolationSet:
    """Exact set of violated (fd, pair) entries.

    Facts are grouped by their FD left-hand-side projection first, so the
    common consistent case stays near-linear instead of quadratic.
    """
    entries: set[tuple[FunctionalDependency, frozenset[Fact]]] = set()
    for fd in _validated(db, sigma):
        lhs_idx = fd.lhs_indices(db.schema)
        rhs_idx = fd.rhs_indices(db.schema)
        groups: dict[tuple[str, ...], list[Fact]] = {}
        for f in db.facts_of(fd.relation):
            groups.setdefault(tuple(f.values[i] for i in lhs_idx), []).append(f)
        for group in groups.values():
            if len(group) < 2:
                continue
            for f, g in combinations(group, 2):
                if any(f.values[i] != g.values[i] for i in rhs_idx):
                    entries.add((fd, frozenset((f, g))))
    return ViolationSet(frozenset(entries))


def satisfies(db: Database, sigma: Iterable[FunctionalDependency]) -> bool:
    return not violations(db, sigma)


@dataclass(frozen=True)
class ConflictGraph:
    """Facts as nodes, violating pairs (over all FDs) as edges."""

    nodes: tuple[Fact, ...]
    edges: frozenset[frozenset[Fact]]

    @cached_property
    def _adjacency(self) -> dict[Fact, frozenset[Fact]]:
        adj: dict[Fact, set[Fact]] = {node: set() for node in self.nodes}
        for edge in self.edges:
            f, g = sorted(edge)
            adj[f].add(g)
            adj[g].add(f)
        return {node: frozenset(nbrs) for node, nbrs in adj.items()}

    def neighbors(self, f: Fact) -> frozenset[Fact]:
        return self._adjacency[f]

    def has_edge(self, f: Fact, g: Fact) -> bool:
        return frozenset((f, g)) in self.edges

    def is_independent(self, facts: Iterable[Fact]) -> bool:
        chosen = list(facts)
        return not any(
            frozenset((f, g)) in self.edges for f, g in combinations(chosen, 2)
        )


def conflict_graph(db: Database, sigma: Iterable[FunctionalDependency]) -> ConflictGraph:
    return ConflictGraph(db.sorted_facts, violations(db, sigma).pairs)


@dataclass(frozen=True)
class Block:
    """Facts of one relation agreeing on the key's left-hand side.

    For relations without a key every fact forms its own block.
    """

    relation: str
    key_values: tuple[str, ...]
    facts: frozenset[Fact]

    @property
    def size(self) -> int:
        return len(self.facts)

    @property
    def sorted_facts(self) -> tuple[Fact, ...]:
        return tuple(sorted(self.facts))


def blocks(db: Database, sigma: Iterable[FunctionalDependency]) -> list[Block]:
    """Partition the facts into blocks under a set of primary keys.

    Deterministic order: by relation name, then key values. Raises for
    constraint sets that are not primary keys, since the block structure
    is only meaningful there.
    """
    fds = _validated(db, sigma)
    if not is_primary_keys(fds, db.schema):
        raise ConstraintClassError("blocks require a set of primary keys")
    key_by_relation = {fd.relation: fd for fd in fds}
    out: list[Block] = []
    relations = sorted({f.relation for f in db.facts})
    for relation in relations:
        facts = db.facts_of(relation)
        fd = key_by_relation.get(relation)
        if fd is None:
            out.extend(
                Block(relation, f.values, frozenset((f,))) for f in facts
            )
            continue
        lhs_idx = fd.lhs_indices(db.schema)
        groups: dict[tuple[str, ...], list[Fact]] = {}
        for f in facts:
            groups.setdefault(tuple(f.values[i] for i in lhs_idx), []).append(f)
        for key_values in sorted(groups):
            out.append(Block(relation, key_values, frozenset(groups[key_values])))
    return out


def count_independent_sets(
    g: ConflictGraph, nonempty_only: bool = False, cap: int = DEFAULT_IS_CAP
) -> int:
    """Brute-force independent-set count, including the empty set unless
    nonempty_only. An oracle, not a performance path, hence the hard cap.
    """
    n = len(g.nodes)
    if n > cap:
        raise SizeCapError(f"independent-set counting capped at {cap} nodes, got {n}")
    index = {node: i for i, node in enumerate(g.nodes)}
    masks = []
    for node in g.nodes:
        m = 0
        for nbr in g.neighbors(node):
            m |= 1 << index[nbr]
        masks.append(m)
    count = 0
    for subset in range(1 << n):
        ok = True
        for i in range(n):
            if subset >> i & 1 and masks[i] & subset:
                ok = False
                break
        if ok:
            count += 1
    if nonempty_only:
        count -= 1
    return count


def is_nontrivially_connected(g: ConflictGraph) -> bool:
    """At least two nodes and connected."""
    if len(g.nodes) < 2:
        return False
    seen = {g.nodes[0]}
    frontier = [g.nodes[0]]
    while frontier:
        node = frontier.pop()
        for nbr in g.neighbors(node):
            if nbr not in seen:
                seen.add(nbr)
                frontier.append(nbr)
    return len(seen) == len(g.nodes)
