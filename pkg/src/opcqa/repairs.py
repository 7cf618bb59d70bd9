"""Repairing sequences, repairing chains, and exact answer probabilities.

A repairing sequence deletes one or two facts at a time, each deletion
justified by a currently violated FD, until the residual database is
consistent. The space of all such sequences forms a rooted tree; the
three generator families (uniform repairs, uniform sequences, uniform
operations) only differ in the probabilities they attach to its edges.

Exact probabilities are computed on the subset graph of residual
databases rather than the tree itself: FD violations are a property of a
fact pair alone, so the justified operations of a residual depend only
on which facts remain. The explicit tree is still materialized by
build_chain for golden tests and the chain-dump command, and the two
views are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

from .errors import SizeCapError
from .queries import ConjunctiveQuery, entails
from .relational import (
    Database,
    Fact,
    FunctionalDependency,
    conflict_graph,
    is_nontrivially_connected,
    violations,
)

__all__ = [
    "DEFAULT_TREE_CAP",
    "Operation",
    "RepairingSequence",
    "GeneratorKind",
    "UR",
    "US",
    "UO",
    "UR1",
    "US1",
    "UO1",
    "GENERATORS",
    "ChainEdge",
    "ChainNode",
    "RepairingChain",
    "RepairDistribution",
    "justified_ops",
    "enumerate_sequences",
    "candidate_repairs",
    "sequence_count",
    "canonical_sequences",
    "build_chain",
    "leaf_distribution",
    "repair_distribution",
    "exact_answer_probability",
    "realize_repair",
]

DEFAULT_TREE_CAP = 10**7


@dataclass(frozen=True)
class Operation:
    """Deletion of one fact or of a conflicting pair."""

    removed: frozenset[Fact]

    def __post_init__(self) -> None:
        if not 1 <= len(self.removed) <= 2:
            raise ValueError("an operation removes one or two facts")

    @classmethod
    def of(cls, *facts: Fact) -> "Operation":
        return cls(frozenset(facts))

    @property
    def sort_key(self) -> tuple:
        """Canonical operation order: lexicographic on the sorted removed
        fact keys, so -f < -{f,g} < -g for f < g."""
        return tuple(f.key for f in sorted(self.removed))

    @property
    def is_pair(self) -> bool:
        return len(self.removed) == 2

    def __str__(self) -> str:
        inner = ",".join(str(f) for f in sorted(self.removed))
        return f"-{{{inner}}}" if self.is_pair else f"-{inner}"


@dataclass(frozen=True)
class RepairingSequence:
    """An ordered composition of operations, applied left to right."""

    ops: tuple[Operation, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[Operation]:
        return iter(self.ops)

    @property
    def removed_facts(self) -> frozenset[Fact]:
        return frozenset(f for op in self.ops for f in op.removed)

    def result(self, db: Database) -> Database:
        return db.restrict(db.facts - self.removed_facts)

    def is_complete(self, db: Database, sigma: Iterable[FunctionalDependency]) -> bool:
        return not violations(self.result(db), sigma)

    def validate(
        self,
        db: Database,
        sigma: Iterable[FunctionalDependency],
        require_complete: bool = True,
    ) -> None:
        """Raise unless every step is justified in its residual (and the
        final residual is consistent, unless told otherwise)."""
        sigma = frozenset(sigma)
        current = db
        for pos, op in enumerate(self.ops):
            pairs = violations(current, sigma).pairs
            if not any(op.removed <= pair for pair in pairs):
                raise ValueError(f"operation {op} at position {pos} is not justified")
            current = current.restrict(current.facts - op.removed)
        if require_complete and violations(current, sigma):
            raise ValueError("sequence is not complete: residual still violates the FDs")

    def __str__(self) -> str:
        return "(" + ", ".join(str(op) for op in self.ops) + ")"


EMPTY_SEQUENCE = RepairingSequence(())


@dataclass(frozen=True)
class GeneratorKind:
    """One of the three generator families, optionally restricted to
    singleton deletions."""

    family: str
    singleton_only: bool = False

    def __post_init__(self) -> None:
        if self.family not in ("ur", "us", "uo"):
            raise ValueError(f"unknown generator family {self.family!r}")

    @classmethod
    def parse(cls, label: str) -> "GeneratorKind":
        if label.endswith("1"):
            return cls(label[:-1], True)
        return cls(label, False)

    @property
    def label(self) -> str:
        return self.family + ("1" if self.singleton_only else "")

    def __str__(self) -> str:
        return self.label


UR = GeneratorKind("ur")
US = GeneratorKind("us")
UO = GeneratorKind("uo")
UR1 = GeneratorKind("ur", True)
US1 = GeneratorKind("us", True)
UO1 = GeneratorKind("uo", True)
GENERATORS = {k.label: k for k in (UR, US, UO, UR1, US1, UO1)}


# ---------------------------------------------------------------------------
# Subset-graph engine
# ---------------------------------------------------------------------------


class _Space:
    """Bitmask view of the facts involved in at least one conflict.

    Facts outside every violating pair can never be deleted, so they are
    split off once and re-attached when a residual is reified. Masks have
    bit i set when the i-th conflict fact (in canonical order) is present.
    """

    def __init__(self, db: Database, sigma: frozenset[FunctionalDependency]):
        self.db = db
        self.sigma = sigma
        pairs = violations(db, sigma).pairs
        involved = sorted({f for pair in pairs for f in pair})
        self.facts: tuple[Fact, ...] = tuple(involved)
        self.n = len(self.facts)
        self.full_mask = (1 << self.n) - 1
        index = {f: i for i, f in enumerate(self.facts)}
        self.edges: tuple[tuple[int, int], ...] = tuple(
            sorted(tuple(sorted(index[f] for f in pair)) for pair in pairs)
        )
        self.edge_masks: tuple[int, ...] = tuple(
            (1 << i) | (1 << j) for i, j in self.edges
        )
        self.untouched: frozenset[Fact] = db.facts - frozenset(involved)
        self._ops_memo: dict[tuple[int, bool], tuple[tuple[tuple[int, ...], int], ...]] = {}
        self._leaf_memo: dict[tuple[int, bool], int] = {}
        self._node_memo: dict[tuple[int, bool], int] = {}

    def consistent(self, mask: int) -> bool:
        return all(em & mask != em for em in self.edge_masks)

    def ops(self, mask: int, singleton_only: bool) -> tuple[tuple[tuple[int, ...], int], ...]:
        """Justified operations of a residual, as (index tuple, op mask)
        pairs in canonical order."""
        key = (mask, singleton_only)
        hit = self._ops_memo.get(key)
        if hit is not None:
            return hit
        found: set[tuple[int, ...]] = set()
        for (i, j), em in zip(self.edges, self.edge_masks):
            if em & mask == em:
                found.add((i,))
                found.add((j,))
                if not singleton_only:
                    found.add((i, j))
        out = tuple(
            (idx, sum(1 << i for i in idx)) for idx in sorted(found)
        )
        self._ops_memo[key] = out
        return out

    def database_of(self, mask: int) -> Database:
        kept = frozenset(self.facts[i] for i in range(self.n) if mask >> i & 1)
        return self.db.restrict(kept | self.untouched)

    def operation_of(self, idx: tuple[int, ...]) -> Operation:
        return Operation(frozenset(self.facts[i] for i in idx))

    # -- tree-size and leaf counts, shared across sequence nodes with the
    # -- same residual (the subtree below a node depends only on its mask)

    def leaf_count(self, mask: int, singleton_only: bool, cap: int) -> int:
        key = (mask, singleton_only)
        hit = self._leaf_memo.get(key)
        if hit is not None:
            return hit
        ops = self.ops(mask, singleton_only)
        if not ops:
            out = 1
        else:
            out = sum(
                self.leaf_count(mask & ~om, singleton_only, cap) for _, om in ops
            )
        if len(self._leaf_memo) > cap:
            raise SizeCapError(
                f"over {cap} distinct residual states; the repairing tree "
                "is at least that large"
            )
        self._leaf_memo[key] = out
        return out

    def tree_node_count(self, mask: int, singleton_only: bool, cap: int) -> int:
        key = (mask, singleton_only)
        hit = self._node_memo.get(key)
        if hit is not None:
            return hit
        ops = self.ops(mask, singleton_only)
        out = 1 + sum(
            self.tree_node_count(mask & ~om, singleton_only, cap) for _, om in ops
        )
        if len(self._node_memo) > cap:
            raise SizeCapError(
                f"over {cap} distinct residual states; the repairing tree "
                "is at least that large"
            )
        self._node_memo[key] = out
        return out

    def reachable_masks(self, singleton_only: bool, cap: int) -> list[int]:
        """All residuals reachable from the full database, largest first
        (a valid topological order: operations strictly shrink masks)."""
        seen = {self.full_mask}
        frontier = [self.full_mask]
        while frontier:
            mask = frontier.pop()
            for _, om in self.ops(mask, singleton_only):
                child = mask & ~om
                if child not in seen:
                    if len(seen) >= cap:
                        raise SizeCapError(
                            f"over {cap} reachable residual databases"
                        )
                    seen.add(child)
                    frontier.append(child)
        return sorted(seen, key=lambda m: (-bin(m).count("1"), -m))


@lru_cache(maxsize=256)
def _space(db: Database, sigma: frozenset[FunctionalDependency]) -> _Space:
    return _Space(db, sigma)


def _ensure_tree_budget(space: _Space, singleton_only: bool, cap: int) -> int:
    size = space.tree_node_count(space.full_mask, singleton_only, cap)
    if size > cap:
        raise SizeCapError(f"repairing tree has {size} nodes, cap is {cap}")
    return size


# ---------------------------------------------------------------------------
# Public sequence-space operations
# ---------------------------------------------------------------------------


def justified_ops(
    current: Database,
    sigma: Iterable[FunctionalDependency],
    singleton_only: bool = False,
) -> list[Operation]:
    """All operations justified by some currently violated FD, in
    canonical order."""
    found: set[frozenset[Fact]] = set()
    for pair in violations(current, sigma).pairs:
        f, g = sorted(pair)
        found.add(frozenset((f,)))
        found.add(frozenset((g,)))
        if not singleton_only:
            found.add(pair)
    return sorted((Operation(fs) for fs in found), key=lambda op: op.sort_key)


def _dfs_leaves(
    space: _Space, singleton_only: bool
) -> Iterator[tuple[tuple[tuple[int, ...], ...], int]]:
    """Leaves in depth-first canonical order as (op index path, mask)."""

    def walk(mask: int, prefix: tuple[tuple[int, ...], ...]):
        ops = space.ops(mask, singleton_only)
        if not ops:
            yield prefix, mask
            return
        for idx, om in ops:
            yield from walk(mask & ~om, prefix + (idx,))

    yield from walk(space.full_mask, ())


def _sequence_of(space: _Space, path: tuple[tuple[int, ...], ...]) -> RepairingSequence:
    return RepairingSequence(tuple(space.operation_of(idx) for idx in path))


def enumerate_sequences(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    singleton_only: bool = False,
    cap: int = DEFAULT_TREE_CAP,
) -> list[RepairingSequence]:
    """All complete repairing sequences, in depth-first canonical order.

    The tree size is computed up front on the residual subset graph; the
    call fails before enumerating anything if it exceeds the cap.
    """
    space = _space(db, frozenset(sigma))
    _ensure_tree_budget(space, singleton_only, cap)
    return [_sequence_of(space, path) for path, _ in _dfs_leaves(space, singleton_only)]


def candidate_repairs(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    singleton_only: bool = False,
    cap: int = DEFAULT_TREE_CAP,
) -> set[Database]:
    """Results of all complete sequences, found on the subset graph
    without walking the (much larger) sequence tree."""
    space = _space(db, frozenset(sigma))
    return {
        space.database_of(mask)
        for mask in space.reachable_masks(singleton_only, cap)
        if space.consistent(mask)
    }


def sequence_count(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    singleton_only: bool = False,
    cap: int = DEFAULT_TREE_CAP,
) -> int:
    """|CRS| (or the singleton variant) by dynamic programming on the
    subset graph; exact for arbitrary FDs, without touching the tree."""
    space = _space(db, frozenset(sigma))
    return space.leaf_count(space.full_mask, singleton_only, cap)


def _canonical_paths(
    space: _Space, singleton_only: bool, ordering: str
) -> dict[int, tuple[tuple[int, ...], ...]]:
    """Per result mask, the preferred complete path under the ordering."""
    if ordering not in ("dfs", "reversed-dfs"):
        raise ValueError(f"unknown ordering {ordering!r}")
    chosen: dict[int, tuple[tuple[int, ...], ...]] = {}
    for path, mask in _dfs_leaves(space, singleton_only):
        if ordering == "reversed-dfs" or mask not in chosen:
            chosen[mask] = path
    return chosen


def canonical_sequences(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    singleton_only: bool = False,
    ordering: str = "dfs",
    cap: int = DEFAULT_TREE_CAP,
) -> set[RepairingSequence]:
    """One designated complete sequence per candidate repair: the first
    one reaching it in depth-first tree order ("dfs"), or the last
    ("reversed-dfs")."""
    space = _space(db, frozenset(sigma))
    _ensure_tree_budget(space, singleton_only, cap)
    return {
        _sequence_of(space, path)
        for path in _canonical_paths(space, singleton_only, ordering).values()
    }


# ---------------------------------------------------------------------------
# Explicit chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainEdge:
    op: Operation
    probability: Fraction
    child: "ChainNode"


@dataclass(frozen=True)
class ChainNode:
    residual: Database
    edges: tuple[ChainEdge, ...]

    @property
    def is_leaf(self) -> bool:
        return not self.edges


@dataclass(frozen=True)
class RepairingChain:
    """The explicit edge-labeled tree of one generator over one instance."""

    db: Database
    sigma: frozenset[FunctionalDependency]
    kind: GeneratorKind
    root: ChainNode

    def leaves(self) -> list[tuple[RepairingSequence, Fraction, Database]]:
        """(sequence, probability, repair) triples in depth-first order."""
        out: list[tuple[RepairingSequence, Fraction, Database]] = []

        def walk(node: ChainNode, ops: tuple[Operation, ...], p: Fraction) -> None:
            if node.is_leaf:
                out.append((RepairingSequence(ops), p, node.residual))
                return
            for edge in node.edges:
                walk(edge.child, ops + (edge.op,), p * edge.probability)

        walk(self.root, (), Fraction(1))
        return out

    def leaf_distribution(self) -> dict[RepairingSequence, Fraction]:
        return {seq: p for seq, p, _ in self.leaves()}

    def repair_distribution(self) -> "RepairDistribution":
        probs: dict[Database, Fraction] = {}
        for _, p, repair in self.leaves():
            if p:
                probs[repair] = probs.get(repair, Fraction(0)) + p
        return RepairDistribution(probs)

    def node_count(self) -> int:
        def count(node: ChainNode) -> int:
            return 1 + sum(count(e.child) for e in node.edges)

        return count(self.root)

    def to_json(self) -> dict:
        def render(node: ChainNode, label: Fraction | None, p: Fraction) -> dict:
            out: dict = {
                "residual": [str(f) for f in node.residual.sorted_facts],
            }
            if label is not None:
                out["label"] = f"{label.numerator}/{label.denominator}"
            if node.is_leaf:
                out["pi"] = f"{p.numerator}/{p.denominator}"
            else:
                out["children"] = [
                    {"op": str(e.op), **render(e.child, e.probability, p * e.probability)}
                    for e in node.edges
                ]
            return out

        return {
            "generator": self.kind.label,
            "node_count": self.node_count(),
            "root": render(self.root, None, Fraction(1)),
        }


def build_chain(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    kind: GeneratorKind,
    cap: int = DEFAULT_TREE_CAP,
    ordering: str = "dfs",
) -> RepairingChain:
    """Materialize the full tree with exact rational edge labels.

    The uniform-repairs labels are counts of canonical sequences below
    each node; when no canonical sequence passes through a node its
    outgoing labels are immaterial and fall back to the uniform choice,
    keeping every non-leaf's labels summing to 1.
    """
    sigma = frozenset(sigma)
    space = _space(db, sigma)
    singleton = kind.singleton_only
    _ensure_tree_budget(space, singleton, cap)

    prefix_counts: dict[tuple[tuple[int, ...], ...], int] = {}
    if kind.family == "ur":
        for path in _canonical_paths(space, singleton, ordering).values():
            for stop in range(len(path) + 1):
                prefix = path[:stop]
                prefix_counts[prefix] = prefix_counts.get(prefix, 0) + 1

    def build(mask: int, prefix: tuple[tuple[int, ...], ...]) -> ChainNode:
        ops = space.ops(mask, singleton)
        if not ops:
            return ChainNode(space.database_of(mask), ())
        if kind.family == "uo":
            labels = [Fraction(1, len(ops))] * len(ops)
        elif kind.family == "us":
            total = space.leaf_count(mask, singleton, cap)
            labels = [
                Fraction(space.leaf_count(mask & ~om, singleton, cap), total)
                for _, om in ops
            ]
        else:
            here = prefix_counts.get(prefix, 0)
            if here == 0:
                labels = [Fraction(1, len(ops))] * len(ops)
            else:
                labels = [
                    Fraction(prefix_counts.get(prefix + (idx,), 0), here)
                    for idx, _ in ops
                ]
        edges = tuple(
            ChainEdge(space.operation_of(idx), label, build(mask & ~om, prefix + (idx,)))
            for (idx, om), label in zip(ops, labels)
        )
        return ChainNode(space.database_of(mask), edges)

    return RepairingChain(db, sigma, kind, build(space.full_mask, ()))


def leaf_distribution(chain: RepairingChain) -> dict[RepairingSequence, Fraction]:
    return chain.leaf_distribution()


# ---------------------------------------------------------------------------
# Exact distributions without the tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepairDistribution:
    """Candidate repairs with their exact probabilities."""

    probs: dict[Database, Fraction]

    def __post_init__(self) -> None:
        total = sum(self.probs.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"repair probabilities sum to {total}, not 1")
        if any(p < 0 for p in self.probs.values()):
            raise ValueError("negative repair probability")

    @property
    def support(self) -> list[Database]:
        return sorted(self.probs, key=lambda d: d.sorted_facts)

    def probability(self, repair: Database) -> Fraction:
        return self.probs.get(repair, Fraction(0))

    def items(self):
        return ((d, self.probs[d]) for d in self.support)

    def __len__(self) -> int:
        return len(self.probs)


def repair_distribution(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    kind: GeneratorKind,
    cap: int = DEFAULT_TREE_CAP,
) -> RepairDistribution:
    """Exact distribution over candidate repairs for one generator.

    Uniform-repairs is uniform over the candidate repairs and
    uniform-sequences weights each repair by its number of complete
    sequences, so both reduce to counting on the subset graph; the
    uniform-operations walk is propagated forward across it. All three
    agree with the materialized chain (cross-checked in tests).
    """
    sigma = frozenset(sigma)
    space = _space(db, sigma)
    singleton = kind.singleton_only
    masks = space.reachable_masks(singleton, cap)

    if kind.family == "ur":
        repairs = [m for m in masks if space.consistent(m)]
        share = Fraction(1, len(repairs))
        return RepairDistribution({space.database_of(m): share for m in repairs})

    if kind.family == "us":
        paths: dict[int, int] = {space.full_mask: 1}
        for mask in masks:
            weight = paths.get(mask, 0)
            if not weight or space.consistent(mask):
                continue
            for _, om in space.ops(mask, singleton):
                child = mask & ~om
                paths[child] = paths.get(child, 0) + weight
        leaves = {m: paths[m] for m in masks if space.consistent(m) and paths.get(m)}
        total = sum(leaves.values())
        return RepairDistribution(
            {space.database_of(m): Fraction(w, total) for m, w in leaves.items()}
        )

    mass: dict[int, Fraction] = {space.full_mask: Fraction(1)}
    for mask in masks:
        weight = mass.get(mask)
        if weight is None or space.consistent(mask):
            continue
        ops = space.ops(mask, singleton)
        share = weight / len(ops)
        for _, om in ops:
            child = mask & ~om
            mass[child] = mass.get(child, Fraction(0)) + share
    return RepairDistribution(
        {
            space.database_of(m): mass[m]
            for m in masks
            if space.consistent(m) and mass.get(m)
        }
    )


def exact_answer_probability(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    kind: GeneratorKind,
    q: ConjunctiveQuery,
    c: tuple[str, ...] = (),
    cap: int = DEFAULT_TREE_CAP,
) -> Fraction:
    """Probability that a repair drawn from the generator's distribution
    returns the answer tuple."""
    dist = repair_distribution(db, sigma, kind, cap)
    total = Fraction(0)
    for repair, p in dist.items():
        if p and entails(repair, q, c):
            total += p
    return total


# ---------------------------------------------------------------------------
# Witness construction for the independent-set correspondence
# ---------------------------------------------------------------------------


def realize_repair(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    target: Database,
) -> RepairingSequence:
    """A complete sequence whose result is the given independent set.

    Facts are stratified by conflict-graph distance from the target and
    removed deepest stratum first, so every deletion still has its
    witness pair intact. An empty target keeps the construction anchored
    at the canonically least fact and removes it last, paired with one of
    its neighbors.
    """
    sigma = frozenset(sigma)
    g = conflict_graph(db, sigma)
    if not is_nontrivially_connected(g):
        raise ValueError("database is not non-trivially connected under the FDs")
    kept = frozenset(target.facts)
    if not kept <= db.facts:
        raise ValueError("target is not a subset of the database")
    if not g.is_independent(kept):
        raise ValueError("target is not an independent set of the conflict graph")

    empty_target = not kept
    anchor = g.nodes[0] if empty_target else None
    seeds = {anchor} if empty_target else set(kept)

    strata: list[list[Fact]] = [sorted(seeds)]
    seen = set(seeds)
    while True:
        nxt = {
            nbr for f in strata[-1] for nbr in g.neighbors(f) if nbr not in seen
        }
        if not nxt:
            break
        seen |= nxt
        strata.append(sorted(nxt))

    ops: list[Operation] = []
    if empty_target:
        for stratum in reversed(strata[2:]):
            ops.extend(Operation.of(f) for f in stratum)
        partner = strata[1][0]
        ops.extend(Operation.of(f) for f in strata[1] if f != partner)
        ops.append(Operation.of(partner, anchor))
    else:
        for stratum in reversed(strata[1:]):
            ops.extend(Operation.of(f) for f in stratum)
    return RepairingSequence(tuple(ops))
