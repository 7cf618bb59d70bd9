"""Seeded samplers for the three generator families.

Randomness contract: a SplitMix64-style counter generator, fixed for the
lifetime of the package. Stream k of seed s produces

    out_i = mix64(base + (i+1) * GOLDEN),   base = mix64(s + k * STREAM)

over 64-bit wrapping arithmetic, where mix64 is the SplitMix64
finalizer. Streams are cheap to construct, so parallel trials take one
stream each and any aggregate of trials is independent of scheduling.

Categorical draws use exact integer thresholds (uniform 64-bit rejection
below the largest multiple of n), never floating point, so the samplers
hit their target distributions exactly, not merely approximately.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

from .counting import sequence_count_for_profile
from .errors import UnsupportedCombinationError
from .relational import Block, Database, Fact, FunctionalDependency, blocks, is_primary_keys
from .repairs import GeneratorKind, Operation, RepairingSequence, _space

__all__ = [
    "GOLDEN",
    "STREAM",
    "mix64",
    "RandomSource",
    "SampleOutcome",
    "sample_repair_uniform",
    "sample_sequence_uniform",
    "sample_sequence_uo",
    "sample_outcome",
]

_M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM = 0xBF58476D1CE4E5B9


def mix64(x: int) -> int:
    """SplitMix64 finalizer over 64-bit wrapping arithmetic."""
    x &= _M64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _M64
    x ^= x >> 31
    return x


class RandomSource:
    """One deterministic draw stream, identified by (seed, stream_index).

    Estimators treat stream_index as a base offset: trial t of an
    estimate seeded with (s, k) consumes stream (s, k + t). Identical
    identifiers reproduce identical draws, bit for bit.
    """

    __slots__ = ("seed", "stream_index", "_state")

    def __init__(self, seed: int, stream_index: int = 0):
        if stream_index < 0:
            raise ValueError("stream_index must be non-negative")
        self.seed = seed & _M64
        self.stream_index = stream_index
        self._state = mix64((self.seed + STREAM * stream_index) & _M64)

    def next64(self) -> int:
        self._state = (self._state + GOLDEN) & _M64
        return mix64(self._state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n). n = 1 consumes no randomness."""
        if n <= 0:
            raise ValueError("randbelow needs a positive bound")
        if n == 1:
            return 0
        if n <= 1 << 64:
            limit = (1 << 64) - ((1 << 64) % n)
            while True:
                u = self.next64()
                if u < limit:
                    return u % n
        words = (n.bit_length() + 63) // 64
        span = 1 << (64 * words)
        limit = span - span % n
        while True:
            u = 0
            for _ in range(words):
                u = u << 64 | self.next64()
            if u < limit:
                return u % n

    def spawn(self, offset: int) -> "RandomSource":
        return RandomSource(self.seed, self.stream_index + offset)


@dataclass(frozen=True)
class SampleOutcome:
    """One draw: the repair, plus the sequence for sequence-valued
    samplers. All samplers are direct, hence the constant weight."""

    repair: Database
    sequence: RepairingSequence | None = None
    weight: int = 1

    def __post_init__(self) -> None:
        if self.weight != 1:
            raise ValueError("samplers are unweighted")


# ---------------------------------------------------------------------------
# Block-structured samplers (primary keys)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _key_blocks(
    db: Database, sigma: frozenset[FunctionalDependency]
) -> tuple[tuple[tuple[Fact, ...], ...], frozenset[Fact]]:
    """(facts of each block of size >= 2, in block order; facts kept
    unconditionally). Raises for non-primary-key FD sets."""
    parts: list[Block] = blocks(db, sigma)
    nontrivial = tuple(b.sorted_facts for b in parts if b.size >= 2)
    always = frozenset(f for b in parts if b.size < 2 for f in b.facts)
    return nontrivial, always


def sample_repair_uniform(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    rng: RandomSource,
    singleton_only: bool = False,
) -> Database:
    """Uniform candidate repair of a primary-key instance.

    Every block of size m independently keeps one survivor or empties
    (m+1 equally likely outcomes; m in singleton mode, where emptying is
    unreachable). Draws happen in block order.
    """
    nontrivial, always = _key_blocks(db, frozenset(sigma))
    kept = set(always)
    for facts in nontrivial:
        m = len(facts)
        choice = rng.randbelow(m if singleton_only else m + 1)
        if choice < m:
            kept.add(facts[choice])
    return db.restrict(kept)


def _profile_after(sizes: dict[int, int], block: int, removed: int) -> tuple[int, ...]:
    out = dict(sizes)
    out[block] -= removed
    return tuple(sorted(out.values()))


def sample_sequence_uniform(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    rng: RandomSource,
    singleton_only: bool = False,
) -> RepairingSequence:
    """Uniform complete repairing sequence of a primary-key instance.

    Each step draws a justified operation with probability proportional
    to the number of complete sequences below it; the products telescope
    so every leaf comes out at exactly 1/|CRS|.
    """
    nontrivial, _ = _key_blocks(db, frozenset(sigma))
    remaining: list[list[Fact]] = [list(facts) for facts in nontrivial]
    ops: list[Operation] = []
    while True:
        active = {b: len(facts) for b, facts in enumerate(remaining) if len(facts) >= 2}
        if not active:
            break
        # candidate operations across all active blocks, canonical order
        candidates: list[tuple[tuple, int, tuple[Fact, ...]]] = []
        for b in active:
            facts = remaining[b]
            for i, f in enumerate(facts):
                candidates.append(((f.key,), b, (f,)))
                if not singleton_only:
                    for g in facts[i + 1 :]:
                        candidates.append(((f.key, g.key), b, (f, g)))
        candidates.sort(key=lambda c: c[0])
        weights = [
            sequence_count_for_profile(
                _profile_after(active, b, len(removed)), singleton_only
            )
            for _, b, removed in candidates
        ]
        total = sum(weights)
        r = rng.randbelow(total)
        acc = 0
        for (_, b, removed), w in zip(candidates, weights):
            acc += w
            if r < acc:
                ops.append(Operation(frozenset(removed)))
                for f in removed:
                    remaining[b].remove(f)
                break
    return RepairingSequence(tuple(ops))


# ---------------------------------------------------------------------------
# Uniform-operations walk (any FDs)
# ---------------------------------------------------------------------------


def sample_sequence_uo(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    rng: RandomSource,
    singleton_only: bool = False,
) -> RepairingSequence:
    """Random walk picking a justified operation uniformly at each step.

    Works for arbitrary FD sets; the leaf distribution is the
    uniform-operations chain's by construction.
    """
    space = _space(db, frozenset(sigma))
    mask = space.full_mask
    path: list[tuple[int, ...]] = []
    while True:
        ops = space.ops(mask, singleton_only)
        if not ops:
            break
        idx, om = ops[rng.randbelow(len(ops))]
        path.append(idx)
        mask &= ~om
    return RepairingSequence(tuple(space.operation_of(idx) for idx in path))


def sample_outcome(
    db: Database,
    sigma: Iterable[FunctionalDependency],
    kind: GeneratorKind,
    rng: RandomSource,
) -> SampleOutcome:
    """Draw once from the sampler matching the generator kind."""
    sigma = frozenset(sigma)
    if kind.family in ("ur", "us") and not is_primary_keys(sigma, db.schema):
        raise UnsupportedCombinationError(
            f"no {kind.label} sampler beyond primary keys; uo/uo1 work for any FDs"
        )
    if kind.family == "ur":
        return SampleOutcome(sample_repair_uniform(db, sigma, rng, kind.singleton_only))
    if kind.family == "us":
        seq = sample_sequence_uniform(db, sigma, rng, kind.singleton_only)
    else:
        seq = sample_sequence_uo(db, sigma, rng, kind.singleton_only)
    return SampleOutcome(seq.result(db), seq)
