"""Oblivious building blocks: shuffle, permute, compaction, intersection, expansion.

All of them run in ``O(n)`` communication (up to the word size) and
``O(log n)`` rounds, and their message sizes depend only on public sizes.
"""

from __future__ import annotations

import numpy as np

from rankjoin import circuits as C
from rankjoin.circuits import ScanOp, SharedVector
from rankjoin.keyed_hash import ANDS_PER_ROUND, keyed_hash
from rankjoin.relation import SharedRelation


class IntersectionError(RuntimeError):
    """The matching step saw more than two records with one digest."""


class SizeViolation(RuntimeError):
    """A public output bound is smaller than the true output size."""


# ---------------------------------------------------------------- shuffle --

class ShuffleHandle:
    """Permutations this party knows, one list per resharing pass."""

    def __init__(self, perms):
        self.perms = perms


def _apply(v, perm, inverse):
    if not inverse:
        return v[..., perm]
    out = np.empty_like(v)
    out[..., perm] = v
    return out


def _pass(ctx, xs, q, perms, inverse):
    """One resharing pass: parties ``q`` and ``q+1`` permute, ``q+2`` waits."""
    a, b = q, (q + 1) % 3
    me = ctx.party
    shapes = [x.shape for x in xs]
    if me not in (a, b):
        # u_{q+2} is shared with party q+1, u_q with party q.
        u_last = [ctx.prg.prev.words(s) for s in shapes]
        u_first = [ctx.prg.next.words(s) for s in shapes]
        ctx.idle_round()
        return [SharedVector(x, y) for x, y in zip(u_last, u_first)], None
    if perms is None:
        stream = ctx.prg.next if me == a else ctx.prg.prev
        perms = [stream.permutation(x.n) for x in xs]
    if me == a:
        ys = [_apply(x.first ^ x.second, p, inverse) for x, p in zip(xs, perms)]
        masks = [ctx.prg.prev.words(s) for s in shapes]
        peer = b
    else:
        ys = [_apply(x.second, p, inverse) for x, p in zip(xs, perms)]
        masks = [ctx.prg.next.words(s) for s in shapes]
        peer = a
    msg = np.concatenate([(y ^ u).ravel() for y, u in zip(ys, masks)]) if xs else np.zeros(0, np.uint64)
    got = ctx.exchange({peer: msg}, expect=[peer])[peer]
    mid = msg ^ got
    out, at = [], 0
    for u, s in zip(masks, shapes):
        k = int(np.prod(s, dtype=np.int64))
        m = mid[at:at + k].reshape(s)
        at += k
        out.append(SharedVector(u, m) if me == a else SharedVector(m, u))
    return out, perms


def shuffle_many(ctx, xs) -> tuple[list, ShuffleHandle]:
    """Apply an independent secret permutation to the last axis of each array.

    No single party learns any of the permutations; each pass is known to
    two parties only.
    """
    known = [None, None, None]
    for q in range(3):
        xs, perms = _pass(ctx, xs, q, None, inverse=False)
        known[q] = perms
    return xs, ShuffleHandle(known)


def unshuffle_many(ctx, ys, handle: ShuffleHandle) -> list:
    for q in (2, 1, 0):
        ys, _ = _pass(ctx, ys, q, handle.perms[q] if ctx.party in (q, (q + 1) % 3) else None, inverse=True)
    return ys


def shuffle(ctx, x: SharedVector):
    (y,), handle = shuffle_many(ctx, [x])
    return y, handle


def unshuffle(ctx, y: SharedVector, handle: ShuffleHandle) -> SharedVector:
    return unshuffle_many(ctx, [y], handle)[0]


# ---------------------------------------------------------------- permute --

def permute_many(ctx, items) -> list:
    """For each ``(x, p)`` return ``y`` with ``y[p[i] - 1] = x[i]``.

    ``p`` holds 1-based targets.  Values and targets are shuffled together,
    the shuffled targets are opened and the rows placed locally.  If ``p``
    is not a permutation the call still terminates but the output is
    meaningless.
    """
    if not items:
        return []
    joint = [C.concat([C.as_rows(x), p.reshape(1, -1)], axis=0) for x, p in items]
    shuffled, _ = shuffle_many(ctx, joint)
    targets = C.reveal(ctx, C.concat([s[-1] for s in shuffled]))
    out, at = [], 0
    for (x, _), s in zip(items, shuffled):
        n = s.n
        t = (targets[at:at + n].astype(np.int64) - 1) % max(n, 1)
        at += n
        first = np.zeros((s.shape[0] - 1, n), np.uint64)
        second = np.zeros_like(first)
        first[..., t] = s.first[:-1]
        second[..., t] = s.second[:-1]
        y = SharedVector(first, second)
        out.append(y if x.first.ndim > 1 else y[0])
    return out


def permute(ctx, x: SharedVector, p: SharedVector) -> SharedVector:
    return permute_many(ctx, [(x, p)])[0]


def permute_relation(ctx, rel: SharedRelation, p: SharedVector) -> SharedRelation:
    return rel.from_stacked(permute(ctx, rel.stacked(), p))


def gather(ctx, x: SharedVector, q: SharedVector) -> SharedVector:
    """``y[i] = x[q[i] - 1]`` via two permutations."""
    n = q.n
    inv = permute(ctx, C.public(ctx, np.arange(1, n + 1, dtype=np.uint64)), q)
    return permute(ctx, x, inv)


# ------------------------------------------------------------- compaction --

def compaction_many(ctx, items) -> list:
    """Stable compaction of each ``(x, t)``: rows with bit ``t`` first, both halves in order.

    Only the low bit of ``t`` is read.  All items must share one length.
    """
    if not items:
        return []
    n = items[0][1].n
    if any(t.n != n for _, t in items):
        raise ValueError("compaction_many needs equal lengths")
    if n == 0:
        return [x for x, _ in items]
    k = len(items)
    bits = C.stack([C.and_public(t, C.ONE) for _, t in items])
    counts = C.prefix_sum(ctx, C.concat([bits, C.not_bit(ctx, bits)], axis=0))
    marked, unmarked = counts[:k], counts[k:]
    total = marked.take([n - 1])
    dest = C.mux(ctx, bits, marked, C.add(ctx, unmarked, total))
    return permute_many(ctx, [(x, dest[i]) for i, (x, _) in enumerate(items)])


def compaction(ctx, x: SharedVector, t: SharedVector) -> SharedVector:
    return compaction_many(ctx, [(x, t)])[0]


# ----------------------------------------------------------- intersection --

def _records(ctx, keys: SharedVector, marker: SharedVector, offsets) -> SharedVector:
    """Keys plus a dummy tag; dummy rows become ``(offset + i, 0, ..., 1)``."""
    alt = np.zeros(keys.shape, np.uint64)
    alt[0] = offsets
    rows = C.mux(ctx, marker, keys, C.public(ctx, alt))
    return C.concat([rows, C.not_bit(ctx, marker).reshape(1, -1)], axis=0)


def _match_positions(digest: np.ndarray) -> np.ndarray:
    order = np.argsort(digest, kind="stable")
    ds = digest[order]
    same = ds[1:] == ds[:-1]
    if np.any(same[1:] & same[:-1]):
        raise IntersectionError("more than two records share one digest")
    i = np.nonzero(same)[0]
    return np.stack([order[i], order[i + 1]], axis=1)


def _route(payload: SharedVector, pairs: np.ndarray) -> SharedVector:
    """Swap payloads within each matched pair; everything else becomes 0."""
    first = np.zeros_like(payload.first)
    second = np.zeros_like(payload.second)
    a, b = pairs[:, 0], pairs[:, 1]
    first[..., a], first[..., b] = payload.first[..., b], payload.first[..., a]
    second[..., a], second[..., b] = payload.second[..., b], payload.second[..., a]
    return SharedVector(first, second)


def _match_mpc(ctx, records, payload, nx):
    w = records.shape[0]
    (mixed,), handle = shuffle_many(ctx, [C.concat([records, payload], axis=0)])
    digest = C.reveal(ctx, keyed_hash(ctx, mixed[:w], ctx.config.hash_rounds))
    pairs = _match_positions(digest)
    ctx.meter.disclose("intersection_matches", len(pairs))
    routed = unshuffle(ctx, _route(mixed[w:], pairs), handle)
    return routed.take(np.arange(nx))


def match_schedule(party: int, w: int, p: int, total: int, hash_rounds: int) -> list:
    """Per-round ``(sends, recvs)`` byte counts of the matching core for one party."""
    nxt, prv = (party + 1) % 3, (party - 1) % 3

    def shuffle_rounds(rows):
        out = []
        for q in range(3):
            a, b = q, (q + 1) % 3
            nbytes = 8 * rows * total
            if party == a:
                out.append(({b: nbytes}, {b: nbytes}))
            elif party == b:
                out.append(({a: nbytes}, {a: nbytes}))
            else:
                out.append(({}, {}))
        return out

    sched = shuffle_rounds(w + p)
    for _ in range(w * hash_rounds):
        for ands in ANDS_PER_ROUND:
            sched.append(({prv: 8 * ands * total}, {nxt: 8 * ands * total}))
    sched.append(({prv: 8 * total}, {nxt: 8 * total}))
    sched += shuffle_rounds(p)
    return sched


def _match_dealer(ctx, records, payload, nx):
    w, p, total = records.shape[0], payload.shape[0], records.n

    def clear(rec, pay):
        table = {}
        for j in range(nx, total):
            table.setdefault(tuple(rec[:, j]), []).append(j)
        out = np.zeros((p, nx), np.uint64)
        for i in range(nx):
            hits = table.get(tuple(rec[:, i]), [])
            if len(hits) > 1:
                raise IntersectionError("more than two records share one digest")
            if hits:
                out[:, i] = pay[:, hits[0]]
        return [out]

    (view,) = ctx.dealer.call(
        ctx, [(records.first, records.second), (payload.first, payload.second)], clear
    )
    for sends, recvs in match_schedule(ctx.party, w, p, total, ctx.config.hash_rounds):
        ctx.charge(sends, recvs)
    return SharedVector(*view)


def intersection(ctx, x_keys, x_marker, y_keys, y_marker, payload=None) -> SharedVector:
    """Payload of the matching ``Y`` row for every ``X`` row, or 0.

    Non-dummy rows within ``X`` (and within ``Y``) must be distinct.  With no
    payload the result is a 0/1 membership indicator.
    """
    xk, yk = C.as_rows(x_keys), C.as_rows(y_keys)
    nx, ny = xk.n, yk.n
    if xk.shape[0] != yk.shape[0]:
        raise ValueError("X and Y keys have different widths")
    flat = payload is None or payload.first.ndim == 1
    pay = C.public(ctx, np.ones((1, ny), np.uint64)) if payload is None else C.as_rows(payload)
    if nx == 0:
        out = C.zeros(ctx, (pay.shape[0], 0))
        return out[0] if flat else out
    records = _records(
        ctx,
        C.concat([xk, yk]),
        C.concat([x_marker, y_marker]),
        np.arange(nx + ny, dtype=np.uint64),
    )
    pay = C.concat([C.zeros(ctx, (pay.shape[0], nx)), pay])
    core = _match_dealer if ctx.config.backend == "dealer" else _match_mpc
    out = core(ctx, records, pay, nx)
    return out[0] if flat else out


def segment_index(ctx, heads: SharedVector) -> SharedVector:
    """1-based position of each row within its segment."""
    return C.segmented_scan(ctx, heads, C.public(ctx, np.ones(heads.shape, np.uint64)), ScanOp.ADD)


def extended_intersection(
    ctx, x_keys, x_marker, y_keys, y_marker, payload=None, x_heads=None, x_index=None, spread=True
):
    """Like ``intersection`` but ``X`` may repeat keys, provided equal keys are adjacent.

    Every row of a run of equal keys receives the payload of the matching
    ``Y`` row.  ``X`` and ``Y`` must have the same length; pad the shorter
    one with dummies.  Segment heads and indices of ``X`` may be passed in
    when already known.  With ``spread=False`` only the first row of each
    run is filled and the caller finishes with a segmented ADD scan.
    """
    xk, yk = C.as_rows(x_keys), C.as_rows(y_keys)
    if xk.n != yk.n:
        raise ValueError(f"extended intersection needs |X| == |Y|, got {xk.n} and {yk.n}")
    n = xk.n
    heads = C.segment_heads(ctx, xk, x_marker) if x_heads is None else x_heads
    index = segment_index(ctx, heads) if x_index is None else x_index
    t = intersection(
        ctx,
        C.concat([xk, index.reshape(1, -1)], axis=0),
        x_marker,
        C.concat([yk, C.public(ctx, np.ones((1, n), np.uint64))], axis=0),
        y_marker,
        payload,
    )
    return C.segmented_scan(ctx, heads, t, ScanOp.ADD) if spread else t


def pad(ctx, x: SharedVector, n: int) -> SharedVector:
    """Append zero columns up to length ``n`` (zero marker means dummy)."""
    extra = n - x.n
    if extra <= 0:
        return x
    return C.concat([x, C.zeros(ctx, x.shape[:-1] + (extra,))])


# -------------------------------------------------------------- expansion --

def expansion(ctx, x: SharedVector, d: SharedVector, m: int, check_size: bool = True):
    """Repeat row ``i`` of ``x`` ``d[i]`` times, padded with dummies to length ``m``.

    Returns ``(values, marker)``.  ``m`` is public.  When the degrees add up
    to more than ``m`` a single bit is opened and ``SizeViolation`` raised.
    """
    x = C.as_rows(x)
    k, n = x.shape
    if m == 0:
        return C.zeros(ctx, (k, 0)), C.zeros(ctx, (0,))
    if n == 0:
        return C.zeros(ctx, (k, m)), C.zeros(ctx, (m,))
    ends = C.prefix_sum(ctx, d)
    total = ends.take([n - 1])
    if check_size:
        over = C.reveal(ctx, C.lt(ctx, C.public(ctx, np.array([m], np.uint64)), total))
        if over[0]:
            raise SizeViolation(f"degrees add up to more than the bound {m}")
    starts = C.concat([C.zeros(ctx, (1,)), ends.take(np.arange(n - 1))])
    # Zero-degree rows are sent past the end so that targets stay distinct.
    zero = C.eq(ctx, d, C.zeros(ctx, (n,)))
    targets = C.mux(ctx, zero, C.public(ctx, np.arange(m, m + n, dtype=np.uint64)), starts)
    width = m + n
    payload = pad(ctx, C.concat([x, C.public(ctx, np.ones((1, n), np.uint64))], axis=0), width)
    placed = intersection(
        ctx,
        C.public(ctx, np.arange(width, dtype=np.uint64)),
        C.public(ctx, np.ones(width, np.uint64)),
        pad(ctx, targets, width),
        pad(ctx, C.public(ctx, np.ones(n, np.uint64)), width),
        payload,
    ).take(np.arange(m))
    values = C.prefix_sum(ctx, placed[:k], ScanOp.COPY, valid=placed[k])
    marker = C.lt(ctx, C.public(ctx, np.arange(m, dtype=np.uint64)), total)
    return values, marker


def _exclusive(ctx, inclusive: SharedVector) -> SharedVector:
    n = inclusive.n
    head = C.zeros(ctx, inclusive.shape[:-1] + (1,))
    return C.concat([head, inclusive.take(np.arange(n - 1))])


def expansion_with_ranks(ctx, rel: SharedRelation, degree: SharedVector, m: int, check_size=True) -> SharedRelation:
    """Expand ``rel`` by ``degree`` and give every output row valid ranks.

    Copies of one input row receive consecutive ranks starting where that
    row's block begins in rank order; dummy rows get their position.
    """
    n = rel.n
    keys = list(rel.ranks)
    order = C.public(ctx, np.arange(1, n + 1, dtype=np.uint64))
    new_ranks = [C.zeros(ctx, (0,)) for _ in keys]
    if keys and n:
        moved = permute_many(ctx, [(C.stack([order, degree]), rel.ranks[k]) for k in keys])
        starts = _exclusive(ctx, C.prefix_sum(ctx, C.stack([mv[1] for mv in moved])))
        new_ranks = permute_many(ctx, [(starts[i], moved[i][0]) for i in range(len(keys))])
    rows = [rel.columns[a] for a in rel.columns] + new_ranks + [order]
    parts = [C.stack(rows)]
    if rel.annotation is not None:
        parts.append(rel.annotation)
    values, marker = expansion(ctx, C.concat(parts, axis=0), degree, m, check_size)
    ncol = len(rel.columns)
    columns = {a: values[i] for i, a in enumerate(rel.columns)}
    origin = values[ncol + len(keys)]
    ann = values[ncol + len(keys) + 1:] if rel.annotation is not None else None
    ranks = {}
    if keys and m:
        copy_no = C.segmented_prefix_sum(
            ctx, origin, C.public(ctx, np.ones(m, np.uint64)), ScanOp.ADD, marker=marker
        )
        base = values[ncol:ncol + len(keys)]
        fixed = C.mux(
            ctx,
            marker,
            C.add(ctx, base, copy_no),
            C.public(ctx, np.arange(1, m + 1, dtype=np.uint64)),
        )
        ranks = {k: C.as_rows(fixed)[i] for i, k in enumerate(keys)}
    elif keys:
        ranks = {k: C.zeros(ctx, (0,)) for k in keys}
    return SharedRelation(columns, marker, ranks, ann, rel.semiring)
