"""Replicated (2,3) XOR secret sharing over 64-bit words.

A value ``v`` is split into three words ``v0 ^ v1 ^ v2 == v``.  Party ``p``
(0-based internally, 1-based in the public API) holds the pair
``(v_p, v_{p+1})``: party 1 holds ``(v0, v1)``, party 2 ``(v1, v2)`` and
party 3 ``(v2, v0)``.  Any single party sees two uniformly random words; any
two parties together hold all three.

Correlated randomness comes from three pairwise seeds.  ``seed_p`` is known
to parties ``p`` and ``p+1``; for party ``p`` it is the *next* seed and for
party ``p+1`` the *previous* one.  Both holders of a seed must consume its
stream in exactly the same order and amount.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

WORD_BITS = 64
MASK = (1 << WORD_BITS) - 1
N_PARTIES = 3


class InsufficientShares(ValueError):
    """Reconstruction attempted with fewer than two distinct parties."""


class SeedMismatch(RuntimeError):
    """Two neighbours disagree about the seed they are supposed to share."""


@dataclass(frozen=True)
class ReplicatedShare:
    """One party's view of a single shared word."""

    first: int
    second: int
    party: int  # 1..3


def share(v: int, randomness: tuple[int, int]) -> tuple[ReplicatedShare, ...]:
    """Split ``v`` using the two supplied random words as ``v0`` and ``v1``."""
    v0, v1 = (w & MASK for w in randomness)
    words = (v0, v1, (v ^ v0 ^ v1) & MASK)
    return tuple(
        ReplicatedShare(words[p], words[(p + 1) % 3], p + 1) for p in range(3)
    )


def reconstruct(a: ReplicatedShare, b: ReplicatedShare) -> int:
    if a.party == b.party:
        raise InsufficientShares(f"both shares come from party {a.party}")
    words = {}
    for s in (a, b):
        p = s.party - 1
        words[p] = s.first
        words[(p + 1) % 3] = s.second
    return words[0] ^ words[1] ^ words[2]


def share_array(values, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Share a whole array; returns ``[(first, second)]`` indexed by 0-based party."""
    v = np.asarray(values, dtype=np.uint64)
    w0 = rng.integers(0, 1 << 64, size=v.shape, dtype=np.uint64, endpoint=False)
    w1 = rng.integers(0, 1 << 64, size=v.shape, dtype=np.uint64, endpoint=False)
    words = (w0, w1, v ^ w0 ^ w1)
    return [(words[p], words[(p + 1) % 3]) for p in range(3)]


def reconstruct_array(view_a, party_a: int, view_b, party_b: int) -> np.ndarray:
    """Combine two 0-based party views ``(first, second)`` of the same array."""
    if party_a == party_b:
        raise InsufficientShares(f"both views come from party {party_a + 1}")
    words = {}
    for (first, second), p in ((view_a, party_a), (view_b, party_b)):
        words[p] = np.asarray(first, dtype=np.uint64)
        words[(p + 1) % 3] = np.asarray(second, dtype=np.uint64)
    return words[0] ^ words[1] ^ words[2]


def pack_shares(first, second) -> bytes:
    """Little-endian words, two per share, ``first`` before ``second``."""
    f = np.asarray(first, dtype=np.uint64).ravel()
    s = np.asarray(second, dtype=np.uint64).ravel()
    return np.stack([f, s], axis=-1).astype("<u8").tobytes()


def unpack_shares(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) % 16:
        raise ValueError(f"share payload of {len(data)} bytes is not a whole number of pairs")
    pairs = np.frombuffer(data, dtype="<u8").reshape(-1, 2).astype(np.uint64)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


class PRG:
    """Deterministic word and permutation stream expanded from one seed."""

    _POOL = 1 << 14

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self._pool = np.zeros(0, np.uint64)
        self._at = 0

    def words(self, shape) -> np.ndarray:
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        size = 1
        for s in shape:
            size *= s
        if self._at + size > self._pool.size:
            # Refill in bulk; draws stay a pure function of the total consumed.
            fresh = self._gen.bit_generator.random_raw(max(size, self._POOL)).astype(np.uint64)
            self._pool = np.concatenate([self._pool[self._at:], fresh])
            self._at = 0
        out = self._pool[self._at:self._at + size].copy()
        self._at += size
        return out.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


@dataclass(frozen=True)
class SeedPair:
    """The two pairwise seeds one party knows."""

    with_next: int
    with_prev: int


def seed_digest(seed: int) -> bytes:
    return hashlib.sha256(seed.to_bytes(32, "little")).digest()[:16]


def derive_seed_pairs(master: int, kappa: int = 128) -> list[SeedPair]:
    """Deterministic seeds for tests and single-host runs.

    Anyone holding ``master`` learns every seed, so this is only meant for
    in-process sessions and reproducible benchmarks.
    """
    seeds = []
    for q in range(3):
        h = hashlib.sha256(f"pairwise-seed/{master}/{q}".encode()).digest()
        seeds.append(int.from_bytes(h, "little") >> (256 - kappa))
    return [SeedPair(with_next=seeds[p], with_prev=seeds[(p - 1) % 3]) for p in range(3)]


class CorrelatedRandomness:
    """One party's two pairwise PRG streams."""

    def __init__(self, pair: SeedPair):
        self.pair = pair
        self.next = PRG(pair.with_next)
        self.prev = PRG(pair.with_prev)

    def zero_share(self, shape) -> np.ndarray:
        """This party's term of a three-way XOR sharing of zero."""
        return self.next.words(shape) ^ self.prev.words(shape)

    def random_share(self, shape) -> tuple[np.ndarray, np.ndarray]:
        """This party's view of a replicated sharing of a fresh random value."""
        return self.prev.words(shape), self.next.words(shape)


def check_neighbours(pairs: list[SeedPair]) -> None:
    for p in range(3):
        q = (p + 1) % 3
        if seed_digest(pairs[p].with_next) != seed_digest(pairs[q].with_prev):
            raise SeedMismatch(f"parties {p + 1} and {q + 1} hold different shared seeds")


class ZeroSharingGenerator:
    """Produces fresh three-way sharings of zero for all parties at once."""

    def __init__(self, pairs: list[SeedPair]):
        check_neighbours(pairs)
        self._parties = [CorrelatedRandomness(p) for p in pairs]

    def next(self, shape=1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(r.zero_share(shape) for r in self._parties)


def setup_correlated(pairs: list[SeedPair]) -> ZeroSharingGenerator:
    return ZeroSharingGenerator(pairs)
