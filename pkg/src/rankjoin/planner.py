"""Query planning for acyclic select-join-aggregate queries.

Planning runs identically at every party from public information only: the
query, the relation sizes and the configuration.  A plan is a flat list of
steps in four phases (selection, reduce, semi-joins, final joins) with the
output-size computation inserted before the final joins when there are any.
Each step records which rank columns every operand still carries, so the
executor can drop dead ranks and the cost model can count them.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from rankjoin import circuits as C
from rankjoin import operators as ops
from rankjoin.relation import SharedRelation, rank_key


class PlanError(ValueError):
    """The query cannot be planned (cyclic, not free-connex, malformed)."""


@dataclass(frozen=True)
class RelationSpec:
    """One relation occurrence: ``name`` is its alias, ``attrs`` global attribute names."""

    name: str
    attrs: tuple
    table: str = ""
    columns: tuple = ()

    def __post_init__(self):
        if len(set(self.attrs)) != len(self.attrs):
            raise PlanError(f"relation {self.name} lists an attribute twice")


@dataclass(frozen=True)
class QuerySpec:
    """``pi^+_output(sigma(R_1) join ... join sigma(R_k))`` with annotation components.

    ``components`` is a tuple of objects exposing ``semiring``; the engine
    attaches how each one is evaluated.  ``predicates`` maps a relation name
    to a tuple of ``operators.Comparison``.
    """

    relations: tuple
    output: tuple
    predicates: dict = field(default_factory=dict)
    components: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise PlanError("relation names must be unique")
        unknown = set(self.output) - set(self.attributes)
        if unknown:
            raise PlanError(f"output attributes {sorted(unknown)} belong to no relation")
        for name in self.predicates:
            if name not in names:
                raise PlanError(f"predicate on unknown relation {name}")

    @classmethod
    def simple(cls, relations: dict, output, semiring=("sum",)):
        """Shorthand used in tests: ``{"R1": ("A", "B"), ...}``."""
        rels = tuple(RelationSpec(k, tuple(v)) for k, v in relations.items())
        comps = tuple(_Plain(s) for s in semiring)
        return cls(rels, tuple(output), components=comps)

    @property
    def attributes(self) -> tuple:
        seen = {}
        for r in self.relations:
            for a in r.attrs:
                seen.setdefault(a, None)
        return tuple(seen)

    @property
    def semiring(self) -> tuple:
        return tuple(c.semiring for c in self.components)

    def schema(self) -> dict:
        return {r.name: tuple(r.attrs) for r in self.relations}


@dataclass(frozen=True)
class _Plain:
    semiring: str


# ------------------------------------------------------------ join trees --

@dataclass(frozen=True)
class JoinTree:
    """A rooted join tree; ``parent[root]`` is ``None``."""

    root: str
    parent: tuple  # sorted (node, parent) pairs
    schema: tuple  # sorted (node, attrs) pairs

    @classmethod
    def build(cls, root: str, parent: dict, schema: dict) -> "JoinTree":
        return cls(root, tuple(sorted(parent.items(), key=lambda kv: kv[0])), tuple(sorted(schema.items())))

    @property
    def parents(self) -> dict:
        return dict(self.parent)

    @property
    def attrs(self) -> dict:
        return dict(self.schema)

    @property
    def nodes(self) -> tuple:
        return tuple(n for n, _ in self.parent)

    def children(self, node) -> list:
        return sorted(c for c, p in self.parent if p == node)

    def post_order(self) -> list:
        out = []

        def walk(x):
            for c in self.children(x):
                walk(c)
            out.append(x)

        walk(self.root)
        return out

    def pre_order(self) -> list:
        out = []

        def walk(x):
            out.append(x)
            for c in self.children(x):
                walk(c)

        walk(self.root)
        return out

    def edge_keys(self, child) -> tuple:
        p = self.parents[child]
        a = self.attrs
        return tuple(x for x in a[child] if x in a[p])

    def ancestors(self, node) -> list:
        out, p = [], self.parents[node]
        while p is not None:
            out.append(p)
            p = self.parents[p]
        return out

    def top(self, attr):
        """Highest node containing ``attr``."""
        a = self.attrs
        for x in self.pre_order():
            if attr in a[x]:
                return x
        raise KeyError(attr)

    def encoding(self) -> str:
        def enc(x):
            kids = [enc(c) for c in self.children(x)]
            return x + (f"({','.join(sorted(kids))})" if kids else "")

        return enc(self.root)

    def is_connected(self) -> bool:
        """Every attribute's nodes form a connected subtree."""
        a = self.attrs
        par = self.parents
        for attr in {x for v in a.values() for x in v}:
            holders = [x for x in a if attr in a[x]]
            # Connected iff exactly one holder has a parent that lacks the attribute.
            tops = [x for x in holders if par[x] is None or attr not in a[par[x]]]
            if len(tops) != 1:
                return False
        return True


def _spanning_trees(nodes, edges):
    """All spanning trees over ``edges`` by backtracking with union-find."""
    k = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}

    def find(uf, i):
        while uf[i] != i:
            i = uf[i]
        return i

    def rec(start, chosen, uf):
        if len(chosen) == k - 1:
            yield list(chosen)
            return
        for e in range(start, len(edges)):
            if len(edges) - e < k - 1 - len(chosen):
                return
            u, v = edges[e]
            ru, rv = find(uf, idx[u]), find(uf, idx[v])
            if ru == rv:
                continue
            nuf = list(uf)
            nuf[ru] = rv
            chosen.append(edges[e])
            yield from rec(e + 1, chosen, nuf)
            chosen.pop()

    yield from rec(0, [], list(range(k)))


def _max_spanning_tree(nodes, edges, weight):
    uf = {v: v for v in nodes}

    def find(v):
        while uf[v] != v:
            v = uf[v]
        return v

    out = []
    for u, v in sorted(edges, key=lambda e: (-weight(e), e)):
        ru, rv = find(u), find(v)
        if ru != rv:
            uf[ru] = rv
            out.append((u, v))
    return out


def _rooted(undirected, root):
    adj = {}
    for u, v in undirected:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    parent, stack = {root: None}, [root]
    while stack:
        x = stack.pop()
        for y in adj.get(x, []):
            if y not in parent:
                parent[y] = x
                stack.append(y)
    return parent


EXHAUSTIVE_LIMIT = 8


def build_join_trees(q: QuerySpec) -> list:
    """Every rooted join tree of the query's full join, sorted by encoding.

    A spanning tree of the attribute-sharing graph is a join tree exactly
    when its summed edge weights ``|F_i & F_j|`` reach ``sum(occ(A) - 1)``.
    Beyond ``EXHAUSTIVE_LIMIT`` relations only the maximum spanning tree is
    considered, under every root.  Cyclic or disconnected joins give ``[]``.
    """
    schema = {r.name: tuple(r.attrs) for r in q.relations}
    nodes = [r.name for r in q.relations]
    if len(nodes) == 1:
        return [JoinTree.build(nodes[0], {nodes[0]: None}, schema)]
    sets = {k: set(v) for k, v in schema.items()}

    def weight(e):
        return len(sets[e[0]] & sets[e[1]])

    edges = [(u, v) for u, v in itertools.combinations(nodes, 2) if weight((u, v))]
    occ = {}
    for v in sets.values():
        for a in v:
            occ[a] = occ.get(a, 0) + 1
    target = sum(c - 1 for c in occ.values())
    if len(nodes) <= EXHAUSTIVE_LIMIT:
        candidates = (t for t in _spanning_trees(nodes, edges) if sum(map(weight, t)) == target)
    else:
        t = _max_spanning_tree(nodes, edges, weight)
        ok = len(t) == len(nodes) - 1 and sum(map(weight, t)) == target
        candidates = [t] if ok else []
    trees = {}
    for t in candidates:
        for root in nodes:
            jt = JoinTree.build(root, _rooted(t, root), schema)
            trees.setdefault(jt.encoding(), jt)
    return [trees[k] for k in sorted(trees)]


def is_free_connex(t: JoinTree, output) -> bool:
    out = set(output)
    attrs = {a for v in t.attrs.values() for a in v}
    tops_out = {t.top(a) for a in out & attrs}
    for b in attrs - out:
        tb = t.top(b)
        if any(tb in t.ancestors(x) for x in tops_out):
            return False
    return True


# ------------------------------------------------------------------ plans --

@dataclass
class Step:
    """One operator application.  ``target`` is updated in place.

    ``ranks`` lists, for each operand, the rank columns it carries going in.
    ``units`` is the cost-model width and ``scale`` names the size it
    multiplies (``n:<relation>``, ``m`` or ``1``).
    """

    op: str
    phase: str
    target: str
    source: str | None = None
    keys: tuple = ()
    predicates: tuple = ()
    refresh: bool = True
    ranks: dict = field(default_factory=dict)
    units: int = 0
    scale: str = ""
    size: str = ""
    label: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["predicates"] = [[p.left, p.op, p.right] for p in self.predicates]
        d["ranks"] = {k: [list(r) for r in v] for k, v in sorted(self.ranks.items())}
        d["keys"] = list(self.keys)
        return d


@dataclass
class CostEstimate:
    """Symbolic ``c_n * n + c_m * m`` plus the per-step entries it sums."""

    entries: list  # (label, phase, units, scale)

    def _sum(self, phases=None):
        n = m = 0
        per = {}
        for label, phase, units, scale in self.entries:
            if phases is not None and phase not in phases:
                continue
            if scale == "m":
                m += units
            elif scale.startswith("n:"):
                n += units
                per[scale[2:]] = per.get(scale[2:], 0) + units
        return n, m, per

    @property
    def c_n(self) -> int:
        return self._sum()[0]

    @property
    def c_m(self) -> int:
        return self._sum()[1]

    def per_relation(self) -> dict:
        return self._sum()[2]

    def phases(self, *names) -> tuple:
        """``(c_n, c_m)`` restricted to the named phases."""
        n, m, _ = self._sum(set(names))
        return n, m

    def evaluate(self, sizes: dict, m: int) -> int:
        total = 0
        for _, _, units, scale in self.entries:
            if scale == "m":
                total += units * m
            elif scale.startswith("n:"):
                total += units * sizes[scale[2:]]
            elif scale == "1":
                total += units
        return total

    def __str__(self) -> str:
        return f"{self.c_n}n + {self.c_m}m"


@dataclass
class QueryPlan:
    tree: JoinTree
    steps: list
    cost: CostEstimate
    output: tuple
    result: str
    needs_m: bool
    initial_ranks: dict  # relation -> list of rank keys the owner must supply

    def to_json(self) -> str:
        body = {
            "tree": self.tree.encoding(),
            "output": list(self.output),
            "result": self.result,
            "needs_m": self.needs_m,
            "initial_ranks": {k: [list(r) for r in v] for k, v in sorted(self.initial_ranks.items())},
            "steps": [s.to_dict() for s in self.steps],
            "cost": [self.cost.c_n, self.cost.c_m],
        }
        return json.dumps(body, sort_keys=True, default=str)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_json().encode()).digest()

    def describe(self) -> str:
        lines = [f"tree {self.tree.encoding()}  cost {self.cost}"]
        for s in self.steps:
            lines.append(f"  [{s.phase:8}] {s.label}")
        return "\n".join(lines)


def _rank_name(key) -> str:
    # Single-letter attributes read best run together (rank_BC).
    if all(len(a) == 1 for a in key):
        return "rank_" + "".join(key)
    return "rank_" + key[0] if len(key) == 1 else "rank[" + ",".join(key) + "]"


def _fmt(name, attrs, ranks):
    rk = ",".join(_rank_name(k) for k in ranks)
    return f"{name}({','.join(attrs)}" + (f";{rk})" if rk else ")")


class _Compiler:
    def __init__(self, t: JoinTree, q: QuerySpec):
        self.t = t
        self.q = q
        self.out = set(q.output)
        self.schema = {k: tuple(v) for k, v in t.attrs.items()}
        self.parent = dict(t.parents)
        self.steps: list = []
        self.scale = {k: f"n:{k}" for k in self.schema}

    def emit(self, op, phase, target, source=None, keys=(), **kw):
        st = Step(op, phase, target, source, tuple(keys), **kw)
        st.schema_in = {x: self.schema[x] for x in (target, source) if x in self.schema}
        self.steps.append(st)
        return st

    def _check_keys(self, keys, *rels):
        for r in rels:
            if not set(keys) <= set(self.schema[r]):
                raise PlanError(f"key {keys} is not part of {r}{self.schema[r]}")

    def children(self, x, alive):
        return [c for c in sorted(alive) if self.parent.get(c) == x]

    def group_by(self, x, keys, phase, refresh=True):
        keys = tuple(a for a in self.schema[x] if a in set(keys))
        self.emit("group_by", phase, x, keys=keys, refresh=refresh)
        self.schema[x] = keys
        if not keys:
            self.scale[x] = "1"

    def merge(self, p, r, phase):
        keys = self.schema[r]
        self._check_keys(keys, p)
        self.emit("merge", phase, p, r, keys)

    def reduce(self, alive, out, phase):
        """Bottom-up reduce; returns the nodes still in the tree."""
        order = [x for x in self.t.post_order() if x in alive]
        alive = set(alive)
        for x in order:
            if x == self.t.root:
                break
            if all(set(self.schema[y]) <= out for y in alive):
                break
            p = self.parent[x]
            if self.children(x, alive):
                continue  # a child stayed, so x cannot move up
            f = (out | set(self.schema[p])) & set(self.schema[x])
            mergeable = f <= set(self.schema[p])
            # Relations are sets, so grouping only matters when it drops attributes.
            if f != set(self.schema[x]):
                self.group_by(x, f, phase, refresh=not mergeable)
            if mergeable:
                self.merge(p, x, phase)
                alive.discard(x)
        return alive

    def compile(self) -> QueryPlan:
        q, t = self.q, self.t
        if not is_free_connex(t, q.output):
            raise PlanError(f"join tree {t.encoding()} is not free-connex for {sorted(q.output)}")
        for name in sorted(q.predicates):
            preds = tuple(q.predicates[name])
            if preds:
                self.emit("select", "select", name, predicates=preds)

        alive = self.reduce(set(self.schema), self.out, "reduce")
        root = t.root
        needs_m = False
        if alive == {root}:
            if set(self.schema[root]) != self.out or not self.out:
                self.group_by(root, self.out, "reduce")
        else:
            leftover = {a for x in alive for a in self.schema[x]} - self.out
            if leftover:
                raise PlanError(f"attributes {sorted(leftover)} survive the reduce phase")
            pre = [x for x in t.pre_order() if x in alive]
            post = [x for x in t.post_order() if x in alive]
            for x in post:
                if x != root:
                    p = self.parent[x]
                    keys = self._common(p, x)
                    self.emit("semi_join", "semijoin", p, x, keys)
            for x in pre:
                if x != root:
                    p = self.parent[x]
                    keys = self._common(x, p)
                    self.emit("semi_join", "semijoin", x, p, keys)
            self.output_size(alive)
            needs_m = True
            for x in post:
                if x != root:
                    p = self.parent[x]
                    keys = self._common(p, x)
                    self.emit("join", "join", p, x, keys)
                    self.schema[p] = self.schema[p] + tuple(a for a in self.schema[x] if a not in self.schema[p])
                    self.scale[p] = "m"
            if not set(self.schema[root]) <= self.out:
                raise PlanError("final join result carries non-output attributes")
        self.emit("result", "result", root)
        return self._finish(needs_m)

    def _common(self, a, b):
        keys = tuple(x for x in self.schema[a] if x in self.schema[b])
        if not keys:
            raise PlanError(f"{a} and {b} share no attributes")
        return keys

    def output_size(self, alive):
        """Count the full join of the remaining tree on annotation-1 copies."""
        saved = dict(self.schema), dict(self.scale)
        copies = {}
        for x in sorted(alive):
            c = f"{x}#"
            copies[x] = c
            self.emit("copy", "outsize", c, x)
            self.schema[c] = self.schema[x]
            self.scale[c] = self.scale[x]
        parent = self.parent
        self.parent = {copies[x]: (copies[parent[x]] if parent[x] in copies else None) for x in alive}
        for x in [y for y in self.t.post_order() if y in alive]:
            c = copies[x]
            if x == self.t.root:
                self.group_by(c, (), "outsize", refresh=False)
                continue
            p = self.parent[c]
            keys = set(self.schema[c]) & set(self.schema[p])
            if keys != set(self.schema[c]):
                self.group_by(c, keys, "outsize", refresh=False)
            self.merge(p, c, "outsize")
        self.emit("output_size", "outsize", copies[self.t.root])
        self.parent = parent
        self.schema, self.scale = saved

    # -- liveness and costs --

    def _finish(self, needs_m) -> QueryPlan:
        live: dict = {}
        # Walk backwards: which rank columns must each relation carry into each step?
        for st in reversed(self.steps):
            op, tg, src, keys = st.op, st.target, st.source, rank_key(st.keys) if st.keys else None
            after_t = set(live.get(tg, set()))
            if op == "result":
                before = {tg: set()}
            elif op == "select":
                before = {tg: after_t}
            elif op == "group_by":
                kept = {k for k in after_t if set(k) <= set(st.keys)}
                if kept != after_t:
                    raise PlanError(f"rank columns {sorted(after_t - kept)} are lost by grouping {tg}")
                before = {tg: kept | ({keys} if keys else set())}
            elif op == "merge":
                before = {tg: after_t | {keys}, src: {keys}}
            elif op == "semi_join":
                before = {tg: after_t | {keys}, src: set(live.get(src, set())) | {keys}}
            elif op == "copy":
                before = {src: set(live.get(src, set())) | after_t}
            elif op == "output_size":
                before = {tg: set()}
            elif op == "join":
                fp, fr = set(st.schema_in[tg]), set(st.schema_in[src])
                to_p, to_r = {keys}, {keys}
                for k in after_t:
                    if set(k) <= fp:
                        to_p.add(k)
                    elif set(k) <= fr:
                        to_r.add(k)
                    else:
                        raise PlanError(f"rank over {k} cannot be produced by joining {tg} and {src}")
                before = {tg: to_p, src: to_r}
            else:  # pragma: no cover - compile emits only the ops above
                raise PlanError(op)
            st.ranks = {}
            for rel, ks in before.items():
                if not all(set(k) <= set(st.schema_in[rel]) for k in ks):
                    raise PlanError(f"step {op} on {rel} needs ranks outside its schema")
                st.ranks[rel] = tuple(sorted(ks))
                live[rel] = ks
        initial = {r.name: tuple(sorted(live.get(r.name, set()))) for r in self.q.relations}

        entries = []
        scale = {k: f"n:{k}" for k in self.t.attrs}
        for st in self.steps:
            width = {x: len(st.schema_in[x]) + len(st.ranks[x]) for x in st.ranks}
            if st.op == "copy":
                scale[st.target] = scale[st.source]
            tg, src = st.target, st.source
            if st.op in ("select", "group_by", "merge", "semi_join"):
                st.units, st.scale = width[tg], scale[tg]
            elif st.op == "join":
                st.units, st.scale = width[tg] + width[src], "m"
            else:
                st.units, st.scale = 0, "1"
            if st.op == "join":
                scale[tg] = "m"
            if st.op == "group_by" and not st.keys:
                scale[tg] = "1"
            st.size = scale[tg]
            st.label = self._label(st)
            if st.units:
                entries.append((st.label, st.phase, st.units, st.scale))
        for st in self.steps:
            del st.schema_in
        result = self.t.root
        return QueryPlan(self.t, self.steps, CostEstimate(entries), tuple(self.q.output), result, needs_m, initial)

    def _label(self, st) -> str:
        sch = st.schema_in
        tg, src = st.target, st.source
        if st.op == "copy":
            return f"copy {src} -> {tg} with unit annotation"
        left = _fmt(tg, sch[tg], st.ranks[tg])
        if st.op == "semi_join":
            body = f"{left} semi-join {_fmt(src, sch[src], st.ranks[src])}"
        elif st.op in ("merge", "join"):
            body = f"{left} join {_fmt(src, sch[src], st.ranks[src])}"
        elif st.op == "group_by":
            body = f"group {left} by ({','.join(st.keys)})"
        elif st.op == "select":
            body = f"select {left} where " + " and ".join(f"{p.left}{p.op}{p.right}" for p in st.predicates)
        elif st.op == "output_size":
            body = f"open output size from {tg}"
        else:
            body = f"result {tg}"
        if st.units:
            body += f"  [{st.units}{'' if st.scale == '1' else st.scale.split(':')[0]}]"
        return body


def estimate_cost(t: JoinTree, q: QuerySpec) -> CostEstimate:
    return compile_plan(t, q).cost


def compile_plan(t: JoinTree, q: QuerySpec) -> QueryPlan:
    return _Compiler(t, q).compile()


def choose_plan(q: QuerySpec, sizes: dict, m_hint: int | None = None, tree: str | None = None) -> QueryPlan:
    """Cheapest free-connex plan at the given relation sizes.

    The real output size is only known once the plan has run its counting
    subplan, so joins are weighed with ``m_hint`` (default: the largest
    input).  Ties go to the smallest tree encoding.  ``tree`` pins the
    choice to one encoding such as ``"R1(R2,R3(R4))"``.
    """
    every = build_join_trees(q)
    trees = [t for t in every if is_free_connex(t, q.output)]
    if not trees:
        if not every:
            raise PlanError("the join is cyclic or contains a cross product")
        raise PlanError("no join tree is free-connex for the requested output attributes")
    if tree is not None:
        trees = [t for t in trees if t.encoding() == tree]
        if not trees:
            raise PlanError(f"{tree} is not a free-connex join tree of this query")
    m = max(sizes.values(), default=0) if m_hint is None else m_hint
    best = None
    for t in trees:
        plan = compile_plan(t, q)
        key = (plan.cost.evaluate(sizes, m), t.encoding())
        if best is None or key < best[0]:
            best = (key, plan)
    return best[1]


# ------------------------------------------------------------- execution --

def _ones(ctx, n):
    return C.public(ctx, np.ones((1, n), np.uint64))


def execute_plan(ctx, plan: QueryPlan, relations: dict, m: int | None = None):
    """Run ``plan`` over shared relations; returns ``(result, m)``.

    ``relations`` maps relation names to ``SharedRelation`` carrying at least
    the plan's initial ranks.  Real rows must not repeat within a relation
    (merge duplicates into one row and combine their annotations).  ``m`` may be given when it is already public;
    otherwise the counting subplan opens it.
    """
    rels = dict(relations)
    for st in plan.steps:
        for name, keys in st.ranks.items():
            if name in rels:
                rels[name] = rels[name].keep_ranks(keys)
        with ctx.phase(st.phase):
            m = _run_step(ctx, st, rels, m)
    return rels[plan.result], m


def _run_step(ctx, st: Step, rels: dict, m):
    tg, src = st.target, st.source
    if st.op == "select":
        rels[tg] = ops.select(ctx, rels[tg], list(st.predicates))
    elif st.op == "group_by":
        rels[tg] = ops.group_by_agg(ctx, rels[tg], st.keys, refresh_ranks=st.refresh)
    elif st.op == "merge":
        rels[tg] = ops.semi_join(ctx, rels[tg], rels[src], st.keys, pull_annotation=True)
        del rels[src]
    elif st.op == "semi_join":
        rels[tg] = ops.semi_join(ctx, rels[tg], rels[src], st.keys)
    elif st.op == "copy":
        base = rels[src]
        rels[tg] = base.replace(annotation=_ones(ctx, base.n), semiring=("sum",))
    elif st.op == "output_size":
        rel = rels.pop(tg)
        opened = int(C.reveal(ctx, rel.annotation[0])[0]) if rel.n else 0
        ctx.meter.disclose("output_size", opened)
        if m is None:
            m = opened
    elif st.op == "join":
        if m is None:
            raise PlanError("join step reached before the output size is known")
        rels[tg] = ops.join(ctx, rels[tg], rels[src], m, st.keys)
        del rels[src]
    return m


def compute_output_size(ctx, tree: JoinTree, relations: dict) -> int:
    """Size of the full join over a dangling-free forest, opened publicly.

    ``tree`` gives the current schema of every relation; each one must carry
    ranks over the keys it shares with its parent (and its children).
    """
    q = QuerySpec(tuple(RelationSpec(k, v) for k, v in tree.attrs.items()), ())
    comp = _Compiler(tree, q)
    comp.output_size(set(tree.nodes))
    steps = comp.steps
    rels = dict(relations)
    m = None
    for st in steps:
        m = _run_step(ctx, st, rels, m) if st.op != "output_size" else _run_step(ctx, st, rels, None)
    return m
