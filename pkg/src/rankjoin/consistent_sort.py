"""Consistent sorting: one total order on keys shared by every relation.

Rows are ordered by ``(h(key), key)`` where ``h`` is a public hash onto
buckets.  Because the order depends only on the key, two relations sorted
independently agree on how their common keys are ordered, and each party
can rank its own tables locally in linear expected time.

Dummy rows (key ``None``) map past the last bucket, so they sort after
every real row.
"""

from __future__ import annotations

import hashlib
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

_W = 128
_MASK_W = (1 << _W) - 1
# Odd multiplier for folding composite keys into one 64-bit word.
_FOLD = 0x9E3779B97F4A7C15


def bucket_bound(max_rows: int) -> int:
    """Smallest power of two at least ``max_rows`` (and at least 1)."""
    return 1 << max(0, (max(1, max_rows) - 1).bit_length())


def fold_key(key) -> int:
    if isinstance(key, tuple):
        acc = 0
        for part in key:
            acc = (acc * _FOLD + int(part) + 1) & 0xFFFFFFFFFFFFFFFF
        return acc
    return int(key) & 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class HashFn:
    """Multiply-add-shift hash ``((a*x + b) mod 2**128) >> (128 - log2 buckets)``.

    ``a`` is odd; both coefficients come from a public seed so that every
    party evaluates the same function.
    """

    a: int
    b: int
    buckets: int

    @classmethod
    def from_seed(cls, seed: int, buckets: int) -> "HashFn":
        if buckets & (buckets - 1):
            raise ValueError("bucket count must be a power of two")
        h = hashlib.sha256(f"consistent-sort/{seed}".encode()).digest()
        a = int.from_bytes(h[:16], "little") | 1
        b = int.from_bytes(h[16:], "little")
        return cls(a, b, buckets)

    def __call__(self, key) -> int:
        if key is None:
            return self.buckets
        if self.buckets == 1:
            return 0
        shift = _W - (self.buckets.bit_length() - 1)
        return ((self.a * fold_key(key) + self.b) & _MASK_W) >> shift


class TableHash:
    """Hash given by an explicit lookup table; handy for worked examples."""

    def __init__(self, table: dict, buckets: int):
        self.table = table
        self.buckets = buckets

    def __call__(self, key) -> int:
        return self.buckets if key is None else self.table[key]


@dataclass(frozen=True)
class RankAssignment:
    """``ranks[i]`` is the 1-based position of input row ``i`` in sorted order."""

    ranks: np.ndarray
    order: np.ndarray  # order[j] = input row placed at position j


def _insertion_sort(items: list) -> list:
    for i in range(1, len(items)):
        cur = items[i]
        j = i - 1
        while j >= 0 and items[j] > cur:
            items[j + 1] = items[j]
            j -= 1
        items[j + 1] = cur
    return items


def consistent_sort(keys: Sequence, h: Callable) -> RankAssignment:
    """Sort rows by ``(h(key), key)``; equal keys keep their input order.

    ``keys[i]`` is an int, a tuple of ints, or ``None`` for a dummy row.
    Runs a counting pass over buckets, then sorts the distinct keys of each
    bucket by insertion, which is linear in expectation because buckets are
    small.
    """
    n = len(keys)
    nb = h.buckets + 1
    bucket = [h(k) for k in keys]
    members = [[] for _ in range(nb)]
    for i, b in enumerate(bucket):
        members[b].append(i)
    order = []
    for b in range(nb):
        rows = members[b]
        if not rows:
            continue
        if b == h.buckets:
            order.extend(rows)
            continue
        by_key = {}
        for i in rows:
            by_key.setdefault(keys[i], []).append(i)
        for k in _insertion_sort(list(by_key)):
            order.extend(by_key[k])
    order = np.asarray(order, dtype=np.int64).reshape(n)
    ranks = np.empty(n, dtype=np.uint64)
    ranks[order] = np.arange(1, n + 1, dtype=np.uint64)
    return RankAssignment(ranks, order)


def bucket_load(keys: Sequence, h: Callable) -> int:
    """Sum over buckets of the squared bucket size."""
    counts = np.bincount([h(k) for k in keys], minlength=h.buckets + 1)
    return int((counts.astype(np.int64) ** 2).sum())


def rank_order_consistent(keys: Sequence, ranks, h: Callable) -> bool:
    """Whether ordering rows by ``ranks`` lists keys in ``(h(key), key)`` order.

    Ties among equal keys may be broken either way; dummies must come last.
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    n = len(keys)
    if sorted(ranks.tolist()) != list(range(1, n + 1)):
        return False
    seq = [keys[i] for i in np.argsort(ranks)]

    def sort_key(k):
        return (h.buckets, ()) if k is None else (h(k), k if isinstance(k, tuple) else (k,))

    return all(sort_key(a) <= sort_key(b) for a, b in zip(seq, seq[1:]))
