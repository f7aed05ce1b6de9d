"""Three-party query execution.

Each party runs ``party_main`` with only its own tables.  Owners normalise
their tables (project to the referenced columns, evaluate annotation
components, merge identical rows, pad back to the public size), rank them
locally with the consistent sort and share everything in one message per
relation.  All parties then plan identically, confirm that they agree on
the plan, and execute it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from rankjoin import circuits as C
from rankjoin.consistent_sort import HashFn, bucket_bound, consistent_sort
from rankjoin.engine.tables import MAX_WORD, Database
from rankjoin.planner import QueryPlan, QuerySpec, choose_plan, execute_plan
from rankjoin.relation import SEMIRINGS, SharedRelation, open_relation
from rankjoin.runtime import SessionConfig, meter_report, run_party, run_three

_REDUCE = {"sum": lambda a, b: (a + b) & MAX_WORD, "max": max, "min": min}


@dataclass
class PreparedTable:
    """An owner's normalised relation, ready to share."""

    columns: np.ndarray  # (k, n)
    ranks: np.ndarray  # (r, n)
    marker: np.ndarray  # (n,)
    annotation: np.ndarray  # (c, n)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.columns, self.ranks, self.marker[None, :], self.annotation]).astype(np.uint64)


def _eval_poly(poly, row: dict) -> int:
    total = 0
    for coef, mono in poly:
        term = coef
        for col, power in mono:
            term *= row[col] ** power
        total += term
    return total


def prepare_table(spec: QuerySpec, plan: QueryPlan, alias: str, table, hash_fn) -> PreparedTable:
    rel = next(r for r in spec.relations if r.name == alias)
    schema = table.schema
    idx = [schema.columns.index(c) for c in rel.columns]
    comps = spec.components
    merged: dict = {}
    for r in table.rows:
        full = {c: int(w) for c, w in zip(schema.columns, r)}
        key = tuple(int(r[i]) for i in idx)
        ann = []
        for comp in comps:
            poly = comp.poly_for(alias)
            if poly is None:
                ann.append(SEMIRINGS[comp.semiring][3])
                continue
            v = _eval_poly(poly, full)
            if comp.semiring == "sum":
                v &= MAX_WORD
            elif not 0 <= v <= MAX_WORD:
                raise ValueError(f"{comp.semiring} argument {v} on {alias} is outside the unsigned 64-bit range")
            ann.append(v)
        if key in merged:
            merged[key] = [_REDUCE[c.semiring](a, b) for c, a, b in zip(comps, merged[key], ann)]
        else:
            merged[key] = ann
    n = table.n
    keys = list(merged)
    real = len(keys)
    columns = np.zeros((len(idx), n), np.uint64)
    annotation = np.zeros((len(comps), n), np.uint64)
    if real:
        columns[:, :real] = np.array(keys, dtype=np.uint64).T
        annotation[:, :real] = np.array([merged[k] for k in keys], dtype=np.uint64).reshape(real, len(comps)).T
    marker = np.zeros(n, np.uint64)
    marker[:real] = 1
    ranks = []
    for rk in plan.initial_ranks[alias]:
        pos = [rel.attrs.index(a) for a in rk]
        vals = [None] * n
        for i in range(real):
            t = tuple(keys[i][p] for p in pos)
            vals[i] = t[0] if len(t) == 1 else t
        ranks.append(consistent_sort(vals, hash_fn).ranks)
    ranks = np.array(ranks, dtype=np.uint64).reshape(len(ranks), n)
    return PreparedTable(columns, ranks, marker, annotation)


def _exchange_sizes(ctx, spec: QuerySpec, db: Database) -> dict:
    tables = spec.extra["tables"]
    names = sorted(set(tables.values()))
    mine = np.array([db.tables[t].n if t in db.tables else 0 for t in names], np.uint64)
    got = ctx.exchange({ctx.next: mine, ctx.prev: mine}, expect=[ctx.prev, ctx.next])
    got[ctx.party] = mine
    by_table = {t: int(got[db.schemas[t].owner - 1][i]) for i, t in enumerate(names)}
    return {alias: by_table[t] for alias, t in tables.items()}


def share_relations(ctx, spec: QuerySpec, plan: QueryPlan, db: Database, sizes: dict, hash_fn) -> dict:
    """Owners share their prepared relations; returns alias -> SharedRelation."""
    rels = {}
    for r in spec.relations:
        table = spec.extra["tables"][r.name]
        owner = db.schemas[table].owner - 1
        rows = len(r.attrs) + len(plan.initial_ranks[r.name]) + 1 + len(spec.components)
        values = None
        if ctx.party == owner:
            values = prepare_table(spec, plan, r.name, db.tables[table], hash_fn).stacked()
        sv = C.input_share(ctx, owner, values, shape=(rows, sizes[r.name]))
        k = len(r.attrs)
        nr = len(plan.initial_ranks[r.name])
        rels[r.name] = SharedRelation(
            {a: sv[i] for i, a in enumerate(r.attrs)},
            sv[k + nr],
            {key: sv[k + i] for i, key in enumerate(plan.initial_ranks[r.name])},
            sv.take(np.arange(k + nr + 1, rows), axis=0) if spec.components else None,
            spec.semiring,
        )
    return rels


@dataclass
class PartyOutput:
    rows: list | None
    m: int | None
    plan: QueryPlan
    sizes: dict
    shares: SharedRelation | None = None
    opened: dict | None = None


def party_main(ctx, spec: QuerySpec, db: Database, reconstruct: bool = True, tree: str | None = None) -> PartyOutput:
    with ctx.phase("setup"):
        sizes = _exchange_sizes(ctx, spec, db)
        plan = choose_plan(spec, sizes, tree=tree)
        # Everything that shapes the protocol must match across parties.
        public = plan.digest() + f"|{ctx.config.prefix_layout}|{ctx.config.hash_seed}".encode()
        ctx.broadcast_check(hashlib.sha256(public).digest(), "query plan and public settings")
        buckets = bucket_bound(max(sizes.values(), default=1))
        hash_fn = HashFn.from_seed(ctx.config.hash_seed, buckets)
        rels = share_relations(ctx, spec, plan, db, sizes, hash_fn)
    result, m = execute_plan(ctx, plan, rels)
    if not reconstruct:
        return PartyOutput(None, m, plan, sizes, shares=result)
    with ctx.phase("open"):
        opened = open_relation(ctx, result)
    return PartyOutput(decode_result(spec, opened), m, plan, sizes, opened=opened)


def count_component(spec: QuerySpec) -> int | None:
    for i, c in enumerate(spec.components):
        if c.semiring == "sum" and not c.polys:
            return i
    return None


def decode_result(spec: QuerySpec, opened: dict) -> list:
    """Turn an opened result relation into rows in SELECT order."""
    items = spec.extra["items"]
    cnt = count_component(spec)
    ann = opened["annotation"]
    out = []
    for i in np.flatnonzero(opened["marker"] & np.uint64(1)):
        comps = [int(ann[c][i]) for c in range(ann.shape[0])]
        if not spec.output and cnt is not None and comps[cnt] == 0:
            continue
        row = []
        for it in items:
            if it.kind == "attr":
                row.append(int(opened["columns"][it.attr][i]))
            else:
                v = sum((coef * comps[c] for c, coef in it.parts), 0)
                if it.kind == "avg":
                    v = v / comps[it.count]
                row.append(v)
        row = tuple(row)
        if spec.extra["expand"]:
            out.extend([row] * comps[cnt])
        else:
            out.append(row)
    return sorted(out)


@dataclass
class QueryResult:
    rows: list
    m: int | None
    plan: QueryPlan
    report: object
    transcripts: list = field(default_factory=list)


def run_query(spec: QuerySpec, db: Database, config: SessionConfig | None = None, tree: str | None = None) -> QueryResult:
    """Run all three parties in-process and reconstruct the result."""
    config = config or SessionConfig()
    views = [db.owned_by(p) for p in (1, 2, 3)]
    res = run_three(lambda ctx, view: party_main(ctx, spec, view, tree=tree), config, views)
    first = res[0]
    return QueryResult(first.rows, first.m, first.plan, meter_report(res.transcripts), res.transcripts)


def run_single_party(party: int, spec: QuerySpec, db: Database, config: SessionConfig, reconstruct=True, tree=None):
    """One party of a networked run (``party`` is 1-based)."""
    return run_party(party - 1, lambda ctx: party_main(ctx, spec, db.owned_by(party), reconstruct, tree), config)
