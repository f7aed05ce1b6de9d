"""Reference evaluation in the clear.

Rows are joined with per-attribute hash indexes and aggregated with exact
rationals.  Results use the same encoding as the secure path: attribute
values stay as words, aggregates are ``Fraction`` objects.
"""

from __future__ import annotations

import operator
from collections import Counter
from fractions import Fraction

from rankjoin.planner import QuerySpec

_OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _rows(spec: QuerySpec, db, rel):
    """Dicts of ``attr -> word`` plus ``alias.column -> value`` for expressions."""
    table = db.tables[spec.extra["tables"][rel.name]]
    schema = table.schema
    idx = [schema.columns.index(c) for c in rel.columns]
    preds = spec.predicates.get(rel.name, ())
    out = []
    for r in table.rows:
        row = {a: int(r[i]) for a, i in zip(rel.attrs, idx)}
        if all(_OPS[p.op](row[p.left], row[p.right] if isinstance(p.right, str) else p.right) for p in preds):
            full = {f"{rel.name}.{c}": t.value(w) for c, t, w in zip(schema.columns, schema.types, r)}
            out.append((row, full))
    return out


def join_rows(spec: QuerySpec, db) -> list:
    """All full-join results as ``(attrs, values)`` pairs."""
    partial = [({}, {})]
    bound: set = set()
    remaining = list(spec.relations)
    while remaining:
        # Prefer a relation connected to what is already joined.
        rel = next((r for r in remaining if bound & set(r.attrs)), remaining[0])
        remaining.remove(rel)
        rows = _rows(spec, db, rel)
        shared = [a for a in rel.attrs if a in bound]
        index = {}
        for row, full in rows:
            index.setdefault(tuple(row[a] for a in shared), []).append((row, full))
        nxt = []
        for attrs, vals in partial:
            for row, full in index.get(tuple(attrs[a] for a in shared), ()):
                nxt.append(({**attrs, **row}, {**vals, **full}))
        partial = nxt
        bound |= set(rel.attrs)
    return partial


def plaintext_oracle(spec: QuerySpec, db) -> list:
    """Result rows (tuples in SELECT order) of ``spec`` over ``db``."""
    items = spec.extra["items"]
    joined = join_rows(spec, db)
    has_agg = any(i.kind != "attr" for i in items)
    if not has_agg:
        rows = [tuple(attrs[i.attr] for i in items) for attrs, _ in joined]
        return sorted(set(rows)) if spec.extra.get("distinct") else sorted(rows)
    groups: dict = {}
    for attrs, vals in joined:
        groups.setdefault(tuple(attrs[a] for a in spec.output), []).append((attrs, vals))
    out = []
    for key, members in groups.items():
        row = []
        for it in items:
            if it.kind == "attr":
                row.append(key[spec.output.index(it.attr)])
                continue
            if it.agg == "COUNT":
                row.append(Fraction(len(members)))
                continue
            vals = [it.expr.evaluate(lambda ref, v=v: v[ref]) for _, v in members]
            if it.agg == "SUM":
                row.append(sum(vals, Fraction(0)))
            elif it.agg == "AVG":
                row.append(sum(vals, Fraction(0)) / len(vals))
            elif it.agg == "MAX":
                row.append(max(vals))
            else:
                row.append(min(vals))
        out.append(tuple(row))
    return sorted(out)


def same_multiset(a, b) -> bool:
    return Counter(a) == Counter(b)
