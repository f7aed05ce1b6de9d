"""Shared fixtures for the test suite: plaintext relations, sharing and oracles."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from rankjoin import circuits as C
from rankjoin.consistent_sort import HashFn, bucket_bound, consistent_sort
from rankjoin.relation import SharedRelation, open_relation, rank_key
from rankjoin.runtime import SessionConfig, run_three

MASK = (1 << 64) - 1


def run(prog, backend="dealer", **kw):
    """Run ``prog(ctx)`` on three parties; returns (party-1 result, transcripts)."""
    res = run_three(prog, SessionConfig(backend=backend, **kw))
    return res[0], res.transcripts


def u64(*vals):
    return np.array(vals, dtype=np.uint64)


@dataclass
class Plain:
    """A plaintext relation with dummies, ranks and one sum annotation row."""

    attrs: tuple
    rows: list  # tuples of ints; dummy rows hold junk
    marker: list  # 0/1
    ann: list
    ranks: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.rows)

    def real(self):
        return [(r, a) for r, a, m in zip(self.rows, self.ann, self.marker) if m]

    def key(self, i, attrs):
        if not self.marker[i]:
            return None
        t = tuple(self.rows[i][self.attrs.index(a)] for a in attrs)
        return t[0] if len(t) == 1 else t

    def rank(self, h, keysets):
        for ks in keysets:
            k = rank_key(ks)
            self.ranks[k] = consistent_sort([self.key(i, k) for i in range(self.n)], h).ranks
        return self


def random_plain(rng, n, attrs, domain=4, dummy=0.25, distinct_on=None) -> Plain:
    rows, marker, seen = [], [], set()
    for _ in range(n):
        r = tuple(int(v) for v in rng.integers(0, domain, len(attrs)))
        real = rng.random() >= dummy
        if real and distinct_on is not None:
            k = tuple(r[attrs.index(a)] for a in distinct_on)
            if k in seen:
                real = False
            seen.add(k)
        rows.append(r)
        marker.append(int(real))
    ann = [int(v) for v in rng.integers(0, 5, n)]
    return Plain(tuple(attrs), rows, marker, ann)


def share_plain(ctx, owner: int, p: Plain, semiring=("sum",)) -> SharedRelation:
    """``owner`` (0-based) secret-shares the relation in one round."""
    k = len(p.attrs)
    keys = list(p.ranks)
    body = [[r[i] for r in p.rows] for i in range(k)]
    body += [list(p.ranks[key]) for key in keys]
    body += [p.marker, p.ann]
    values = np.array(body, dtype=np.uint64).reshape(len(body), p.n)
    sv = C.input_share(ctx, owner, values if ctx.party == owner else None, shape=values.shape)
    return SharedRelation(
        {a: sv[i] for i, a in enumerate(p.attrs)},
        sv[k + len(keys)],
        {key: sv[k + j] for j, key in enumerate(keys)},
        sv.take(np.arange(k + len(keys) + 1, len(body)), axis=0),
        tuple(semiring),
    )


def real_rows(opened, attrs) -> Counter:
    """Multiset of ``(attr values..., annotation)`` over real rows."""
    out = Counter()
    ann = opened["annotation"]
    for i in np.flatnonzero(opened["marker"] == 1):
        row = tuple(int(opened["columns"][a][i]) for a in attrs)
        out[row + tuple(int(ann[c][i]) for c in range(ann.shape[0]))] += 1
    return out


def rank_problems(opened, h) -> list:
    """Violations of the rank invariants in an opened relation.

    Every rank column must be a permutation of 1..n with real rows first,
    and listing real rows by rank must give exactly the key sequence of a
    plaintext consistent sort of the real keys under ``h``.
    """
    problems = []
    marker = np.asarray(opened["marker"], dtype=np.int64)
    n = marker.size
    if not set(np.unique(marker).tolist()) <= {0, 1}:
        problems.append("marker is not 0/1")
    real = int(marker.sum())
    for key, ranks in opened["ranks"].items():
        r = np.asarray(ranks, dtype=np.int64)
        if sorted(r.tolist()) != list(range(1, n + 1)):
            problems.append(f"rank {key} is not a permutation of 1..{n}")
            continue
        if sorted(r[marker == 1].tolist()) != list(range(1, real + 1)):
            problems.append(f"rank {key} does not put real rows first")
            continue
        idx = np.flatnonzero(marker == 1)

        def k(i):
            t = tuple(int(opened["columns"][a][i]) for a in key)
            return t[0] if len(t) == 1 else t

        keys = [k(i) for i in idx]
        expect = [keys[j] for j in consistent_sort(keys, h).order]
        got = [k(i) for i in idx[np.argsort(r[idx])]]
        if got != expect:
            problems.append(f"rank {key} disagrees with the plaintext consistent sort")
    return problems


def hash_for(n, seed=0):
    return HashFn.from_seed(seed, bucket_bound(n))


def open_all(ctx, rel):
    return open_relation(ctx, rel)


def natural_join(R: Plain, S: Plain) -> Counter:
    keys = [a for a in R.attrs if a in S.attrs]
    attrs = tuple(R.attrs) + tuple(a for a in S.attrs if a not in R.attrs)
    out = Counter()
    for r, ar in R.real():
        dr = dict(zip(R.attrs, r))
        for s, as_ in S.real():
            ds = dict(zip(S.attrs, s))
            if all(dr[k] == ds[k] for k in keys):
                row = {**ds, **dr}
                out[tuple(row[a] for a in attrs) + ((ar * as_) & MASK,)] += 1
    return out, attrs


def free_ports(k):
    import socket

    socks = [socket.socket() for _ in range(k)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports
