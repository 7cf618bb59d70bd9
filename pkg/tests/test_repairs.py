"""Repairing trees, chains, exact distributions, and witnesses."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from opcqa import (
    GENERATORS,
    UO,
    UO1,
    UR,
    UR1,
    US,
    US1,
    Database,
    GeneratorKind,
    Operation,
    RepairingSequence,
    SizeCapError,
    build_chain,
    candidate_repairs,
    canonical_sequences,
    enumerate_sequences,
    exact_answer_probability,
    fact,
    justified_ops,
    realize_repair,
    repair_distribution,
    sequence_count,
)

from bruteforce import (
    WIDE_FDS,
    bf_candidate_repairs,
    bf_complete_sequences,
    bf_uo_probability,
    random_fd_instance,
)
from fixtures import (
    F1,
    F2,
    F3,
    keyed_boolean_query,
    keyed_instance,
    keyed_query,
    triple_instance,
    two_key_path_instance,
)


def _remaining(db: Database, repair: Database) -> frozenset:
    return repair.facts


def _as_opset_tuple(seq: RepairingSequence) -> tuple:
    return tuple(op.removed for op in seq)


# ---------------------------------------------------------------------------
# Operations and sequences
# ---------------------------------------------------------------------------


def test_operation_shape_and_order():
    with pytest.raises(ValueError):
        Operation.of()
    with pytest.raises(ValueError):
        Operation.of(F1, F2, F3)
    ops = [
        Operation.of(F1),
        Operation.of(F1, F2),
        Operation.of(F2),
        Operation.of(F2, F3),
        Operation.of(F3),
    ]
    assert sorted(ops, key=lambda op: op.sort_key) == ops
    assert str(Operation.of(F1)) == "-R(a1,b1,c1)"
    assert str(Operation.of(F2, F1)) == "-{R(a1,b1,c1),R(a1,b2,c2)}"


def test_justified_ops_canonical_order():
    db, sigma = triple_instance()
    ops = justified_ops(db, sigma)
    assert [op.removed for op in ops] == [
        frozenset({F1}),
        frozenset({F1, F2}),
        frozenset({F2}),
        frozenset({F2, F3}),
        frozenset({F3}),
    ]
    singles = justified_ops(db, sigma, singleton_only=True)
    assert [op.removed for op in singles] == [
        frozenset({F1}),
        frozenset({F2}),
        frozenset({F3}),
    ]


def test_sequence_validate():
    db, sigma = triple_instance()
    good = RepairingSequence((Operation.of(F1), Operation.of(F2, F3)))
    good.validate(db, sigma)
    # f1 and f3 never conflict, so removing them as a pair is unjustified
    bad = RepairingSequence((Operation.of(F1, F3),))
    with pytest.raises(ValueError):
        bad.validate(db, sigma)
    # justified but incomplete
    partial = RepairingSequence((Operation.of(F1),))
    with pytest.raises(ValueError):
        partial.validate(db, sigma)
    partial.validate(db, sigma, require_complete=False)
    assert good.removed_facts == {F1, F2, F3}
    assert good.result(db).facts == frozenset()


def test_generator_kind_labels():
    assert GeneratorKind.parse("ur") == UR
    assert GeneratorKind.parse("uo1") == UO1
    assert UO1.label == "uo1" and UO1.singleton_only
    assert set(GENERATORS) == {"ur", "us", "uo", "ur1", "us1", "uo1"}
    with pytest.raises(ValueError):
        GeneratorKind("up")


# ---------------------------------------------------------------------------
# Enumeration on the triple-fact example (conflict path f1 - f2 - f3)
# ---------------------------------------------------------------------------


def test_triple_sequence_and_repair_counts():
    db, sigma = triple_instance()
    assert sequence_count(db, sigma) == 9
    assert sequence_count(db, sigma, singleton_only=True) == 5
    assert len(enumerate_sequences(db, sigma)) == 9
    repairs = candidate_repairs(db, sigma)
    assert {r.facts for r in repairs} == {
        frozenset(),
        frozenset({F1}),
        frozenset({F2}),
        frozenset({F3}),
        frozenset({F1, F3}),
    }
    repairs1 = candidate_repairs(db, sigma, singleton_only=True)
    assert {r.facts for r in repairs1} == {
        frozenset({F1}),
        frozenset({F2}),
        frozenset({F3}),
        frozenset({F1, F3}),
    }


def test_triple_canonical_sequences():
    db, sigma = triple_instance()
    canon = canonical_sequences(db, sigma)
    assert {_as_opset_tuple(s) for s in canon} == {
        (frozenset({F1}), frozenset({F2})),
        (frozenset({F1}), frozenset({F2, F3})),
        (frozenset({F1}), frozenset({F3})),
        (frozenset({F2}),),
        (frozenset({F2, F3}),),
    }
    # one canonical sequence per candidate repair, under both orderings
    for ordering in ("dfs", "reversed-dfs"):
        chosen = canonical_sequences(db, sigma, ordering=ordering)
        results = [s.result(db).facts for s in chosen]
        assert len(results) == len(set(results)) == 5
    with pytest.raises(ValueError):
        canonical_sequences(db, sigma, ordering="random")


def test_triple_singleton_sequences_in_dfs_order():
    db, sigma = triple_instance()
    seqs = enumerate_sequences(db, sigma, singleton_only=True)
    assert [_as_opset_tuple(s) for s in seqs] == [
        (frozenset({F1}), frozenset({F2})),
        (frozenset({F1}), frozenset({F3})),
        (frozenset({F2}),),
        (frozenset({F3}), frozenset({F1})),
        (frozenset({F3}), frozenset({F2})),
    ]


def test_enumeration_cap():
    db, sigma = keyed_instance()
    with pytest.raises(SizeCapError):
        enumerate_sequences(db, sigma, cap=50)
    with pytest.raises(SizeCapError):
        sequence_count(db, sigma, cap=10)


# ---------------------------------------------------------------------------
# Chains: edge labels on the triple-fact example
# ---------------------------------------------------------------------------


def test_uniform_repairs_root_labels():
    db, sigma = triple_instance()
    chain = build_chain(db, sigma, UR)
    labels = [e.probability for e in chain.root.edges]
    assert labels == [
        Fraction(3, 5),
        Fraction(0),
        Fraction(1, 5),
        Fraction(1, 5),
        Fraction(0),
    ]


def test_uniform_sequences_root_labels_and_leaves():
    db, sigma = triple_instance()
    chain = build_chain(db, sigma, US)
    labels = [e.probability for e in chain.root.edges]
    assert labels == [
        Fraction(1, 3),
        Fraction(1, 9),
        Fraction(1, 9),
        Fraction(1, 9),
        Fraction(1, 3),
    ]
    leaves = chain.leaves()
    assert len(leaves) == 9
    assert all(p == Fraction(1, 9) for _, p, _ in leaves)


def test_uniform_operations_labels():
    db, sigma = triple_instance()
    chain = build_chain(db, sigma, UO)
    assert [e.probability for e in chain.root.edges] == [Fraction(1, 5)] * 5
    # below -f1 the residual is the conflicting pair {f2, f3}: three ops
    below_f1 = chain.root.edges[0].child
    assert [e.probability for e in below_f1.edges] == [Fraction(1, 3)] * 3


def test_chain_labels_sum_to_one_everywhere():
    db, sigma = triple_instance()
    for kind in (UR, US, UO, UR1, US1, UO1):
        chain = build_chain(db, sigma, kind)
        stack = [chain.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            assert sum(e.probability for e in node.edges) == 1
            stack.extend(e.child for e in node.edges)


def test_chain_json_rendering():
    db, sigma = triple_instance()
    doc = build_chain(db, sigma, US).to_json()
    assert doc["generator"] == "us"
    assert doc["node_count"] > 9
    root = doc["root"]
    assert root["residual"] == ["R(a1,b1,c1)", "R(a1,b2,c2)", "R(a2,b1,c2)"]
    assert len(root["children"]) == 5
    assert root["children"][0]["op"] == "-R(a1,b1,c1)"
    assert root["children"][0]["label"] == "1/3"


# ---------------------------------------------------------------------------
# Exact distributions
# ---------------------------------------------------------------------------


def test_triple_repair_distributions():
    db, sigma = triple_instance()
    by_facts = lambda dist: {r.facts: p for r, p in dist.items()}

    ur = by_facts(repair_distribution(db, sigma, UR))
    assert set(ur.values()) == {Fraction(1, 5)}

    us = by_facts(repair_distribution(db, sigma, US))
    assert us[frozenset({F1, F3})] == Fraction(1, 9)
    for key in (frozenset(), frozenset({F1}), frozenset({F2}), frozenset({F3})):
        assert us[key] == Fraction(2, 9)

    uo = by_facts(repair_distribution(db, sigma, UO))
    assert uo == {
        frozenset(): Fraction(2, 15),
        frozenset({F1}): Fraction(4, 15),
        frozenset({F1, F3}): Fraction(1, 5),
        frozenset({F2}): Fraction(2, 15),
        frozenset({F3}): Fraction(4, 15),
    }

    ur1 = by_facts(repair_distribution(db, sigma, UR1))
    assert set(ur1.values()) == {Fraction(1, 4)}

    us1 = by_facts(repair_distribution(db, sigma, US1))
    assert us1[frozenset({F2})] == Fraction(2, 5)
    assert us1[frozenset({F1})] == us1[frozenset({F3})] == Fraction(1, 5)
    assert us1[frozenset({F1, F3})] == Fraction(1, 5)

    uo1 = by_facts(repair_distribution(db, sigma, UO1))
    assert uo1 == {
        frozenset({F1}): Fraction(1, 6),
        frozenset({F2}): Fraction(1, 3),
        frozenset({F3}): Fraction(1, 6),
        frozenset({F1, F3}): Fraction(1, 3),
    }


def test_distributions_agree_with_materialized_chain():
    for db, sigma in (triple_instance(), keyed_instance(), two_key_path_instance()):
        for kind in (UR, US, UO, UR1, US1, UO1):
            fast = repair_distribution(db, sigma, kind)
            slow = build_chain(db, sigma, kind).repair_distribution()
            assert {r.facts: p for r, p in fast.items()} == {
                r.facts: p for r, p in slow.items()
            }


def test_worked_example_frequencies():
    db, sigma = keyed_instance()
    q = keyed_query()
    assert exact_answer_probability(db, sigma, UR, q, ("b1",)) == Fraction(1, 4)
    assert exact_answer_probability(db, sigma, US, q, ("b1",)) == Fraction(8, 33)
    assert exact_answer_probability(db, sigma, UR, keyed_boolean_query()) == Fraction(1, 4)


def test_random_sweep_against_bruteforce():
    rng = random.Random(60901)
    checked = 0
    while checked < 30:
        db = random_fd_instance(rng, max_facts=6)
        n = sequence_count(db, WIDE_FDS)
        if n > 2000:
            continue
        seqs = enumerate_sequences(db, WIDE_FDS)
        assert len(seqs) == n
        assert [_as_opset_tuple(s) for s in seqs] == bf_complete_sequences(db, WIDE_FDS)
        assert {r.facts for r in candidate_repairs(db, WIDE_FDS)} == bf_candidate_repairs(
            db, WIDE_FDS
        )
        checked += 1


def test_uo_distribution_against_bruteforce():
    from opcqa import Atom, ConjunctiveQuery, Variable

    rng = random.Random(60902)
    x, y = Variable("x"), Variable("y")
    q = ConjunctiveQuery(atoms=(Atom("R", (x, y, y)),))
    checked = 0
    while checked < 15:
        db = random_fd_instance(rng, max_facts=5)
        if sequence_count(db, WIDE_FDS) > 500:
            continue
        for kind, singleton in ((UO, False), (UO1, True)):
            got = exact_answer_probability(db, WIDE_FDS, kind, q)
            want = bf_uo_probability(db, WIDE_FDS, q, singleton_only=singleton)
            assert got == want
        checked += 1


# ---------------------------------------------------------------------------
# Witness sequences for independent sets
# ---------------------------------------------------------------------------


def test_realize_repair_on_two_key_path():
    db, sigma = two_key_path_instance()
    ra, rb, rc = sorted(db.facts)  # R(a1,b1), R(a1,b2), R(a2,b2)
    seq = realize_repair(db, sigma, db.restrict([]))
    assert _as_opset_tuple(seq) == (
        frozenset({rc}),
        frozenset({ra, rb}),
    )
    seq.validate(db, sigma)
    for keep in ([ra], [rb], [rc], [ra, rc]):
        target = db.restrict(keep)
        witness = realize_repair(db, sigma, target)
        witness.validate(db, sigma)
        assert witness.result(db).facts == target.facts


def test_realize_repair_rejects_bad_targets():
    db, sigma = two_key_path_instance()
    ra, rb, rc = sorted(db.facts)
    with pytest.raises(ValueError):
        realize_repair(db, sigma, db.restrict([ra, rb]))  # conflicting pair
    with pytest.raises(ValueError):
        realize_repair(db, sigma, db.restrict([fact("R", "zz", "zz")]))
    lone = Database.of(db.schema, [fact("R", "a1", "b1")])
    with pytest.raises(ValueError):
        realize_repair(lone, sigma, lone.restrict([]))


def test_realize_repair_random_targets():
    rng = random.Random(77)
    from opcqa import conflict_graph, is_nontrivially_connected

    from bruteforce import bf_independent_sets, random_connected_key_instance

    tried = 0
    while tried < 25:
        db, sigma = random_connected_key_instance(rng)
        g = conflict_graph(db, sigma)
        if not is_nontrivially_connected(g):
            continue
        sets = bf_independent_sets(sorted(db.facts), g.edges)
        for kept in sets:
            witness = realize_repair(db, sigma, db.restrict(kept))
            witness.validate(db, sigma)
            assert witness.result(db).facts == frozenset(kept)
        tried += 1
