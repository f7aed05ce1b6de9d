"""Keyed 64-bit hash evaluated on shares.

A small substitution-permutation block cipher under a jointly random key,
chained CBC-MAC style over the words of a record.  Digests are opened, so
equal records become publicly linkable while unequal ones look random.

Round structure: key XOR, sixteen 4-bit S-boxes in parallel, then the
linear map ``x ^ rotl(x, 19) ^ rotl(x, 28)``.  The S-box is evaluated from
its algebraic normal form on bit-sliced nibble planes: one AND layer for
the degree-2 monomials and one for the degree-3 monomials.
"""

from __future__ import annotations

import itertools

import numpy as np

from rankjoin import circuits as C

SBOX = (0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2)
NIBBLE_LOW = np.uint64(0x1111111111111111)
ROTATIONS = (19, 28)


def algebraic_normal_form(sbox=SBOX) -> list:
    """Monomials (as sorted input-bit tuples) of each output bit."""
    out = []
    for c in range(4):
        coeffs = [(sbox[x] >> c) & 1 for x in range(16)]
        for i in range(4):
            for x in range(16):
                if x >> i & 1:
                    coeffs[x] ^= coeffs[x ^ (1 << i)]
        out.append([tuple(b for b in range(4) if m >> b & 1) for m in range(16) if coeffs[m]])
    return out


def _schedule(anf):
    monos = {m for bit in anf for m in bit}
    if any(len(m) > 3 for m in monos):
        raise ValueError("S-box degree above 3 is not supported")
    pairs = sorted(m for m in monos if len(m) == 2)
    triples = []
    for t in sorted(m for m in monos if len(m) == 3):
        split = next(((p, b) for p in pairs for b in t if set(p) | {b} == set(t)), None)
        if split is None:
            split = ((t[0], t[1]), t[2])
            pairs.append(split[0])
        triples.append((t, split))
    return pairs, triples


ANF = algebraic_normal_form()
PAIRS, TRIPLES = _schedule(ANF)
ANDS_PER_ROUND = (len(PAIRS), len(TRIPLES))


def sbox_layer(ctx, x: C.SharedVector) -> C.SharedVector:
    planes = [C.and_public(C.shr(x, b), NIBBLE_LOW) for b in range(4)]
    value = {(b,): planes[b] for b in range(4)}
    for m, v in zip(PAIRS, C.and_many(ctx, [(planes[a], planes[b]) for a, b in PAIRS])):
        value[m] = v
    prods = C.and_many(ctx, [(value[p], planes[b]) for _, (p, b) in TRIPLES])
    for (t, _), v in zip(TRIPLES, prods):
        value[t] = v
    out = None
    for c, monos in enumerate(ANF):
        plane = None
        for m in monos:
            if m == ():
                continue
            plane = value[m] if plane is None else plane ^ value[m]
        if () in monos:
            plane = C.xor_public(ctx, plane, NIBBLE_LOW)
        plane = C.shl(plane, c)
        out = plane if out is None else out ^ plane
    return out


def linear_layer(x: C.SharedVector) -> C.SharedVector:
    out = x
    for r in ROTATIONS:
        out = out ^ C.rotl(x, r)
    return out


def encrypt(ctx, x: C.SharedVector, keys: C.SharedVector) -> C.SharedVector:
    rounds = keys.shape[0] - 1
    for i in range(rounds):
        x = linear_layer(sbox_layer(ctx, x ^ keys[i]))
    return x ^ keys[rounds]


def keyed_hash(ctx, records: C.SharedVector, rounds: int) -> C.SharedVector:
    """Digest of each column of ``records`` (shape ``(w, N)``) under a fresh key."""
    keys = C.random_shared(ctx, (rounds + 1,))
    h = C.zeros(ctx, records.shape[1:])
    for j in range(records.shape[0]):
        h = encrypt(ctx, h ^ records[j], keys)
    return h


# Plaintext reference, used by tests and the dealer backend's self-checks.

def _rotl(w, r):
    return (w << np.uint64(r)) | (w >> np.uint64(64 - r))


def encrypt_plain(x, keys) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64).copy()
    keys = np.asarray(keys, dtype=np.uint64)
    table = np.array(SBOX, dtype=np.uint64)
    for i in range(len(keys) - 1):
        x ^= keys[i]
        y = np.zeros_like(x)
        for nib in range(16):
            sh = np.uint64(4 * nib)
            y |= table[(x >> sh) & np.uint64(0xF)] << sh
        x = y ^ _rotl(y, ROTATIONS[0]) ^ _rotl(y, ROTATIONS[1])
    return x ^ keys[-1]


def hash_plain(records, keys) -> np.ndarray:
    records = np.asarray(records, dtype=np.uint64)
    h = np.zeros(records.shape[1:], dtype=np.uint64)
    for row in records:
        h = encrypt_plain(h ^ row, keys)
    return h


def and_rounds(words: int, rounds: int) -> list:
    """Word ANDs per element in each communication round of ``keyed_hash``."""
    return list(itertools.chain.from_iterable([ANDS_PER_ROUND] * (words * rounds)))
