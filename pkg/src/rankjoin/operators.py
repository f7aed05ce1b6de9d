"""Relational operators on shared relations.

Every operator keeps two invariants on its output: dummy rows carry marker
0, and every rank column orders the real rows consistently with the public
hash and puts dummies last.  Rows may come back in any physical order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rankjoin import circuits as C
from rankjoin.circuits import ScanOp, SharedVector
from rankjoin.primitives import (
    compaction_many,
    expansion_with_ranks,
    extended_intersection,
    pad,
    segment_index,
    permute_many,
    permute_relation,
)
from rankjoin.relation import SEMIRINGS, SharedRelation, rank_key


def _iota(ctx, n):
    return C.public(ctx, np.arange(1, n + 1, dtype=np.uint64))


def update_ranks(ctx, rel: SharedRelation) -> SharedRelation:
    """Recompute every rank column after markers changed.

    For each rank, the row numbers are sorted by that rank, stably compacted
    so real rows come first, and the resulting positions routed back.
    """
    if not rel.ranks or rel.n == 0:
        return rel
    keys = list(rel.ranks)
    order = _iota(ctx, rel.n)
    moved = permute_many(ctx, [(C.stack([order, rel.marker]), rel.ranks[k]) for k in keys])
    packed = compaction_many(ctx, [(mv[0], mv[1]) for mv in moved])
    fresh = permute_many(ctx, [(order, p) for p in packed])
    return rel.replace(ranks=dict(zip(keys, fresh)))


@dataclass(frozen=True)
class Comparison:
    """``left op right`` where ``right`` is a public int or another column name."""

    left: str
    op: str
    right: int | str

    OPS = ("=", "!=", "<", "<=", ">", ">=")


def predicate_bits(ctx, rel: SharedRelation, predicates) -> SharedVector:
    """AND of all comparisons as a 0/1 vector; ORs are not supported."""
    n = rel.n
    lts, eqs, plan = [], [], []
    for p in predicates:
        if p.op not in Comparison.OPS:
            raise ValueError(f"unsupported comparison {p.op!r}")
        a = rel.columns[p.left]
        b = rel.columns[p.right] if isinstance(p.right, str) else C.public(ctx, np.full(n, p.right, np.uint64))
        if p.op in ("=", "!="):
            plan.append(("eq", len(eqs), p.op == "!="))
            eqs.append((a, b))
        else:
            # a < b, a <= b == !(b < a), a > b == b < a, a >= b == !(a < b)
            swap = p.op in ("<=", ">")
            plan.append(("lt", len(lts), p.op in ("<=", ">=")))
            lts.append((b, a) if swap else (a, b))
    lt_bits = C.lt(ctx, C.stack([x for x, _ in lts]), C.stack([y for _, y in lts])) if lts else None
    eq_bits = C.eq(ctx, C.stack([x for x, _ in eqs]), C.stack([y for _, y in eqs])) if eqs else None
    bits = []
    for kind, i, negate in plan:
        b = (lt_bits if kind == "lt" else eq_bits)[i]
        bits.append(C.not_bit(ctx, b) if negate else b)
    return _and_all(ctx, bits) if bits else C.public(ctx, np.ones(n, np.uint64))


def _and_all(ctx, bits):
    while len(bits) > 1:
        half = len(bits) // 2
        prod = C.and_(ctx, C.stack(bits[:half]), C.stack(bits[half:2 * half]))
        bits = [prod[i] for i in range(half)] + bits[2 * half:]
    return bits[0]


def select(ctx, rel: SharedRelation, predicates) -> SharedRelation:
    """Clear the marker of rows failing the predicate, then refresh ranks.

    ``predicates`` is a list of ``Comparison`` or a callable returning a bit
    vector for the relation.
    """
    bits = predicates(ctx, rel) if callable(predicates) else predicate_bits(ctx, rel, predicates)
    return update_ranks(ctx, rel.replace(marker=C.and_(ctx, rel.marker, bits)))


def project(rel: SharedRelation, attrs) -> SharedRelation:
    """Drop columns (and ranks over them); duplicates are kept."""
    return rel.project(attrs)


def _grouped_scan(ctx, heads, rows: list, ops: list) -> list:
    """Segmented scans of several rows, batching rows that share an operator."""
    out = [None] * len(rows)
    for op in dict.fromkeys(ops):
        idx = [i for i, o in enumerate(ops) if o is op]
        scanned = C.segmented_scan(ctx, heads, C.stack([rows[i] for i in idx]), op)
        for j, i in enumerate(idx):
            out[i] = scanned[j]
    return out


def _reduce_all(ctx, x: SharedVector, op: ScanOp) -> SharedVector:
    if op is ScanOp.ADD:
        return C.sum_all(ctx, x)
    f = C.maximum if op is ScanOp.MAX else C.minimum
    while x.n > 1:
        half = x.n // 2
        s = f(ctx, x.take(np.arange(half)), x.take(np.arange(half, 2 * half)))
        x = C.concat([s, x.take(np.arange(2 * half, x.n))]) if x.n % 2 else s
    return x.take(0)


def _aggregate_everything(ctx, rel, rows, ops, identities):
    n = rel.n
    out = []
    mask = C.bit_mask(rel.marker)
    for row, op, ident in zip(rows, ops, identities):
        if n == 0:
            out.append(C.public(ctx, np.array(ident, np.uint64)))
            continue
        if ident == 0:
            masked = C.and_(ctx, row, mask)
        else:
            masked = C.mux(ctx, rel.marker, row, C.public(ctx, np.full(n, ident, np.uint64)))
        out.append(_reduce_all(ctx, masked, op))
    return out


def group_by_agg(
    ctx,
    rel: SharedRelation,
    keys,
    agg: str | None = None,
    target: str | None = None,
    output: str | None = None,
    refresh_ranks: bool = True,
) -> SharedRelation:
    """Group real rows by ``keys``.

    Annotations are always combined with their semiring's addition.  With
    ``agg`` set, one extra column is produced: ``count`` of rows, or the
    ``sum``/``max``/``min`` of column ``target``.  The output keeps only
    the key columns, the aggregate and ranks over subsets of ``keys``.  The
    last row of every group survives.
    """
    keys = list(keys)
    rows, ops, idents = [], [], []
    if rel.annotation is not None:
        for i, s in enumerate(rel.semiring):
            rows.append(rel.annotation[i])
            ops.append(ScanOp(SEMIRINGS[s][0]))
            idents.append(SEMIRINGS[s][2])
    name = None
    if agg is not None:
        if agg not in ("sum", "count", "max", "min"):
            raise ValueError(f"unknown aggregate {agg!r}")
        name = output or (f"{agg}_{target}" if target else agg)
        rows.append(rel.marker if agg == "count" else rel.columns[target])
        ops.append(ScanOp.ADD if agg in ("sum", "count") else ScanOp(agg))
        idents.append(0xFFFFFFFFFFFFFFFF if agg == "min" else 0)

    if not keys:
        vals = _aggregate_everything(ctx, rel, rows, ops, idents)
        vals = [v.reshape(1) for v in vals]
        nann = len(rel.semiring) if rel.annotation is not None else 0
        columns = {name: vals[-1]} if name else {}
        ann = C.stack(vals[:nann]) if nann else None
        return SharedRelation(columns, C.public(ctx, np.ones(1, np.uint64)), {}, ann, rel.semiring)

    key = rank_key(keys)
    if key not in rel.ranks:
        raise KeyError(f"no rank column over {key}")
    T = permute_relation(ctx, rel, rel.ranks[key])
    heads = C.segment_heads(ctx, T.key_rows(keys), T.marker)
    nann = len(rel.semiring) if rel.annotation is not None else 0
    if rows:
        # Same rows as above, now in rank order.
        rows = [T.annotation[i] for i in range(nann)]
        if agg is not None:
            rows.append(T.marker if agg == "count" else T.columns[target])
        rows = _grouped_scan(ctx, heads, rows, ops)
    last = C.and_(ctx, T.marker, C.segment_ends(ctx, heads))
    columns = {a: T.columns[a] for a in keys}
    if name:
        columns[name] = rows[-1]
    out = SharedRelation(
        columns,
        last,
        {k: v for k, v in T.ranks.items() if set(k) <= set(keys)},
        C.stack(rows[:nann]) if nann else None,
        rel.semiring,
    )
    return update_ranks(ctx, out) if refresh_ranks else out


def otimes(ctx, a: SharedVector, b: SharedVector, semiring) -> SharedVector:
    """Componentwise semiring product of two annotation matrices."""
    out = [None] * len(semiring)
    muls = [i for i, s in enumerate(semiring) if SEMIRINGS[s][1] == "mul"]
    adds = [i for i, s in enumerate(semiring) if SEMIRINGS[s][1] == "add"]
    if muls:
        r = C.mul(ctx, a.take(muls, axis=0), b.take(muls, axis=0))
        for j, i in enumerate(muls):
            out[i] = r[j]
    if adds:
        r = C.add(ctx, a.take(adds, axis=0), b.take(adds, axis=0))
        for j, i in enumerate(adds):
            out[i] = r[j]
    return C.stack(out)


def _common(R, S, keys):
    if keys is None:
        keys = [a for a in R.columns if a in S.columns]
    keys = list(keys)
    if not keys:
        raise ValueError("relations share no attributes; cross products are not supported")
    key = rank_key(keys)
    for rel, side in ((R, "left"), (S, "right")):
        if key not in rel.ranks:
            raise KeyError(f"{side} relation has no rank column over {key}")
    return keys, key


def _last_of_group(ctx, rel, keys):
    heads = C.segment_heads(ctx, rel.key_rows(keys), rel.marker)
    return heads, C.and_(ctx, rel.marker, C.segment_ends(ctx, heads))


def semi_join(ctx, R: SharedRelation, S: SharedRelation, keys=None, pull_annotation=False) -> SharedRelation:
    """Keep rows of ``R`` with a partner in ``S``.

    With ``pull_annotation`` the matching ``S`` annotation is multiplied into
    ``R``'s; ``S`` must then have at most one real row per key.
    """
    keys, key = _common(R, S, keys)
    R = permute_relation(ctx, R, R.ranks[key])
    slim = SharedRelation(
        {a: S.columns[a] for a in keys},
        S.marker,
        {},
        S.annotation if pull_annotation else None,
        S.semiring if pull_annotation else (),
    )
    slim = permute_relation(ctx, slim, S.ranks[key])
    _, last = _last_of_group(ctx, slim, keys)
    payload = [C.public(ctx, np.ones((1, S.n), np.uint64))]
    if pull_annotation and S.annotation is not None:
        payload.append(slim.annotation)
    width = max(R.n, S.n)
    t = extended_intersection(
        ctx,
        pad(ctx, R.key_rows(keys), width),
        pad(ctx, R.marker, width),
        pad(ctx, slim.key_rows(keys), width),
        pad(ctx, last, width),
        pad(ctx, C.concat(payload, axis=0), width),
    ).take(np.arange(R.n))
    marker = C.and_(ctx, R.marker, t[0])
    ann = R.annotation
    if pull_annotation and S.annotation is not None:
        if tuple(S.semiring) != tuple(R.semiring):
            raise ValueError("annotation semirings differ")
        ann = otimes(ctx, R.annotation, t[1:], R.semiring)
    return update_ranks(ctx, R.replace(marker=marker, annotation=ann))


_AUX = ("__deg_r", "__deg_s", "__origin", "__copy")


def join(ctx, R: SharedRelation, S: SharedRelation, m: int, keys=None) -> SharedRelation:
    """Natural join padded with dummies to the public bound ``m``.

    Requires ``m`` at least the true join size.  Output rows follow ``R``'s
    rank order over the join key, each ``R`` row repeated once per partner.
    """
    keys, key = _common(R, S, keys)
    if tuple(R.semiring) != tuple(S.semiring) and R.annotation is not None and S.annotation is not None:
        raise ValueError("annotation semirings differ")
    R = permute_relation(ctx, R, R.ranks[key])
    S = permute_relation(ctx, S, S.ranks[key])
    nR, nS = R.n, S.n
    width = max(nR, nS)

    heads_r = C.segment_heads(ctx, R.key_rows(keys), R.marker)
    heads_s = C.segment_heads(ctx, S.key_rows(keys), S.marker)
    hr, hs = _pad_heads(ctx, heads_r, width), _pad_heads(ctx, heads_s, width)
    # Position within the key group.  On a group's last real row this is the
    # group size, and for S it is also the copy number used below.
    index = segment_index(ctx, C.stack([hr, hs]))
    last_r, last_s = C.and_many(
        ctx,
        [(R.marker, C.segment_ends(ctx, heads_r)), (S.marker, C.segment_ends(ctx, heads_s))],
    )
    keys_r = pad(ctx, R.key_rows(keys), width)
    keys_s = pad(ctx, S.key_rows(keys), width)
    mark_r, mark_s = pad(ctx, R.marker, width), pad(ctx, S.marker, width)
    end_r, end_s = pad(ctx, last_r, width), pad(ctx, last_s, width)

    # Degrees: matching group sizes, filled on each group's first row and
    # spread with one batched scan.
    firsts = [
        extended_intersection(ctx, keys_r, mark_r, keys_s, end_s, index[1], hr, index[0], spread=False),
        extended_intersection(ctx, keys_s, mark_s, keys_r, end_r, index[0], hs, index[1], spread=False),
        extended_intersection(ctx, keys_s, mark_s, keys_s, end_s, index[1], hs, index[1], spread=False),
    ]
    degrees = C.segmented_scan(ctx, C.stack([hr, hs, hs]), C.stack(firsts), ScanOp.ADD)
    deg_r = degrees[0].take(np.arange(nR))
    R2 = expansion_with_ranks(ctx, R, deg_r, m)

    head = np.arange(nS)
    aux = dict(zip(_AUX, [
        degrees[1].take(head),
        degrees[2].take(head),
        _iota(ctx, nS),
        index[1].take(head),
    ]))
    S_aux = S.replace(columns={**S.columns, **aux})
    S2 = expansion_with_ranks(ctx, S_aux, aux["__deg_r"], m)

    if m:
        mine = C.segmented_prefix_sum(
            ctx, S2.columns["__origin"], C.public(ctx, np.ones(m, np.uint64)), ScanOp.ADD, marker=S2.marker
        )
        d_r, d_s, copy = S2.columns["__deg_r"], S2.columns["__deg_s"], S2.columns["__copy"]
        one = C.public(ctx, np.ones(m, np.uint64))
        dec = C.sub(ctx, C.stack([mine, copy]), one)
        prods = C.mul(ctx, dec, C.stack([d_s, d_r]))
        diffs = C.sub(ctx, C.stack([copy, prods[0]]), C.stack([mine, prods[1]]))
        pos = _iota(ctx, m)
        # target = i + (I-1) * D_S + J - (J-1) * D_R - I, dummies stay put
        target = C.add(ctx, C.add(ctx, diffs[0], diffs[1]), pos)
        target = C.mux(ctx, S2.marker, target, pos)
        S2 = permute_relation(ctx, S2, target)

    columns = dict(R2.columns)
    for a, v in S2.columns.items():
        if a not in columns and a not in _AUX:
            columns[a] = v
    ranks = dict(R2.ranks)
    for k, v in S2.ranks.items():
        ranks.setdefault(k, v)
    if R2.annotation is not None and S2.annotation is not None:
        ann = otimes(ctx, R2.annotation, S2.annotation, R.semiring) if m else R2.annotation
        semiring = R.semiring
    elif R2.annotation is not None:
        ann, semiring = R2.annotation, R.semiring
    else:
        ann, semiring = S2.annotation, S.semiring
    return SharedRelation(columns, R2.marker, ranks, ann, semiring)


def _pad_heads(ctx, heads, width):
    extra = width - heads.n
    if extra <= 0:
        return heads
    return C.concat([heads, C.public(ctx, np.ones(extra, np.uint64))])
