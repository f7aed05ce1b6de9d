"""Secret-shared relations: data columns, rank columns, a marker and annotations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from rankjoin.circuits import SharedVector, as_rows, concat, reveal, stack

# Annotation semirings, keyed by name: (plus, times, zero, one).
SEMIRINGS = {
    "sum": ("add", "mul", 0, 1),
    "max": ("max", "add", 0, 0),
    "min": ("min", "add", 0xFFFFFFFFFFFFFFFF, 0),
}


def rank_key(attrs) -> tuple:
    """Canonical name of a rank column: the sorted attribute tuple."""
    return tuple(sorted(attrs))


@dataclass
class SharedRelation:
    """A party's view of a shared table.

    Every per-row field has the same length ``n``.  ``marker`` is 1 on real
    rows and 0 on dummies.  ``annotation`` has one row per semiring
    component listed in ``semiring``.
    """

    columns: dict
    marker: SharedVector
    ranks: dict = field(default_factory=dict)
    annotation: SharedVector | None = None
    semiring: tuple = ()

    @property
    def n(self) -> int:
        return self.marker.n

    @property
    def attrs(self) -> tuple:
        return tuple(self.columns)

    def replace(self, **kw) -> "SharedRelation":
        return replace(self, **kw)

    def layout(self) -> list:
        lay = [("col", a) for a in self.columns]
        lay += [("rank", k) for k in self.ranks]
        lay.append(("marker", None))
        if self.annotation is not None:
            lay += [("ann", i) for i in range(self.annotation.shape[0])]
        return lay

    def stacked(self) -> SharedVector:
        rows = [self.columns[a] for a in self.columns]
        rows += [self.ranks[k] for k in self.ranks]
        rows.append(self.marker)
        parts = [stack(rows)]
        if self.annotation is not None:
            parts.append(self.annotation)
        return concat(parts, axis=0)

    def from_stacked(self, sv: SharedVector) -> "SharedRelation":
        cols, ranks, marker, ann = {}, {}, None, []
        for i, (kind, name) in enumerate(self.layout()):
            row = sv[i]
            if kind == "col":
                cols[name] = row
            elif kind == "rank":
                ranks[name] = row
            elif kind == "marker":
                marker = row
            else:
                ann.append(row)
        return SharedRelation(cols, marker, ranks, stack(ann) if ann else None, self.semiring)

    def project(self, attrs) -> "SharedRelation":
        attrs = list(attrs)
        missing = [a for a in attrs if a not in self.columns]
        if missing:
            raise KeyError(f"cannot project onto unknown attributes {missing}")
        keep = set(attrs)
        ranks = {k: v for k, v in self.ranks.items() if set(k) <= keep}
        return self.replace(columns={a: self.columns[a] for a in attrs}, ranks=ranks)

    def keep_ranks(self, keys) -> "SharedRelation":
        keys = {rank_key(k) for k in keys}
        return self.replace(ranks={k: v for k, v in self.ranks.items() if k in keys})

    def key_rows(self, attrs) -> SharedVector:
        return stack([self.columns[a] for a in attrs])


def open_relation(ctx, rel: SharedRelation) -> dict:
    """Reveal every field to all parties (testing and result delivery)."""
    values = reveal(ctx, rel.stacked())
    out = {"columns": {}, "ranks": {}, "annotation": []}
    for i, (kind, name) in enumerate(rel.layout()):
        if kind == "col":
            out["columns"][name] = values[i]
        elif kind == "rank":
            out["ranks"][name] = values[i]
        elif kind == "marker":
            out["marker"] = values[i]
        else:
            out["annotation"].append(values[i])
    out["annotation"] = np.array(out["annotation"], dtype=np.uint64).reshape(len(out["annotation"]), rel.n)
    return out


def public_relation(ctx, columns: dict, marker=None, ranks=None, annotation=None, semiring=()) -> SharedRelation:
    """Share a table whose contents are public (tests and constants)."""
    from rankjoin.circuits import public

    n = len(next(iter(columns.values()))) if columns else len(marker)
    marker = np.ones(n, np.uint64) if marker is None else marker
    ann = None
    if annotation is not None:
        ann = as_rows(public(ctx, np.asarray(annotation, dtype=np.uint64)))
    return SharedRelation(
        {a: public(ctx, v) for a, v in columns.items()},
        public(ctx, marker),
        {rank_key(k): public(ctx, v) for k, v in (ranks or {}).items()},
        ann,
        tuple(semiring),
    )
