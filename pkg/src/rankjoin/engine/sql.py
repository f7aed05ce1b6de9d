"""A small SQL surface for select-join-aggregate queries.

Supported shape::

    SELECT [DISTINCT] items FROM t1 [a1], t2 [a2] ... | t1 JOIN t2 ON ...
    [WHERE c1 AND c2 ...] [GROUP BY cols]

Join conditions must be equalities between columns of different tables;
every other condition must mention a single table.  Aggregates are SUM,
COUNT, AVG, MAX and MIN.  SUM and AVG accept polynomials over columns of any
tables; MAX and MIN need an expression over one table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from rankjoin.engine.expr import Col, Expr, Num, QueryError, TokenStream, parse_expr, tokenize
from rankjoin.engine.tables import TableSchema
from rankjoin.operators import Comparison
from rankjoin.planner import QuerySpec, RelationSpec

AGGREGATES = ("SUM", "COUNT", "AVG", "MAX", "MIN")
_CMP = {"=", "!=", "<>", "<", "<=", ">", ">="}
_FLIP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Component:
    """One annotation row.

    ``polys`` maps an alias to ``((coef, monomial), ...)`` with integer
    coefficients over that table's raw column words; the owner evaluates it
    per row.  Aliases not listed contribute the semiring's one.
    """

    semiring: str
    polys: tuple  # ((alias, ((coef, ((column, power), ...)), ...)), ...)

    def poly_for(self, alias):
        return dict(self.polys).get(alias)


@dataclass(frozen=True)
class OutputItem:
    """How one SELECT column is produced from group keys and components."""

    label: str
    kind: str  # attr | value | avg
    attr: str | None = None
    parts: tuple = ()  # ((component index, Fraction), ...)
    count: int | None = None  # component holding the group count (avg)
    agg: str | None = None  # original aggregate, for the oracle
    expr: Expr | None = None


@dataclass
class _Item:
    agg: str | None
    expr: Expr | None  # None for COUNT(*) / star
    label: str


class _Parser:
    def __init__(self, text):
        self.source = text
        self.ts = TokenStream(tokenize(text))

    def parse(self):
        ts = self.ts
        ts.expect("SELECT")
        distinct = ts.accept("DISTINCT")
        items, star = [], False
        if ts.accept("*"):
            star = True
        else:
            items.append(self._item())
            while ts.accept(","):
                items.append(self._item())
        ts.expect("FROM")
        tables, conds = [self._table()], []
        while True:
            if ts.accept(","):
                tables.append(self._table())
            elif ts.accept("JOIN") or (ts.accept("INNER") and ts.expect("JOIN")):
                tables.append(self._table())
                ts.expect("ON")
                conds += self._conjunction()
            else:
                break
        if ts.accept("WHERE"):
            conds += self._conjunction()
        group = []
        if ts.accept("GROUP"):
            ts.expect("BY")
            group.append(parse_expr(ts))
            while ts.accept(","):
                group.append(parse_expr(ts))
        ts.accept(";")
        if ts.peek.kind != "end":
            raise QueryError(f"unsupported clause near {ts.peek.text!r} (offset {ts.peek.pos})")
        return distinct, star, items, tables, conds, group

    def _item(self):
        ts = self.ts
        t = ts.peek
        start = t.pos
        if t.kind == "name" and t.text.upper() in AGGREGATES and ts.toks[ts.i + 1].text == "(":
            ts.next()
            ts.expect("(")
            if ts.accept("DISTINCT"):
                raise QueryError("DISTINCT inside aggregates is not supported")
            if ts.accept("*"):
                if t.text.upper() != "COUNT":
                    raise QueryError(f"{t.text.upper()}(*) is not valid")
                expr = None
            else:
                expr = parse_expr(ts)
            ts.expect(")")
            item = _Item(t.text.upper(), expr, "")
        else:
            item = _Item(None, parse_expr(ts), "")
        end = ts.peek.pos
        item.label = self.source[start:end].strip()
        if ts.accept("AS"):
            item.label = ts.next().text
        elif ts.peek.kind == "name" and not ts.peek.is_kw("FROM"):
            item.label = ts.next().text
        return item

    def _table(self):
        ts = self.ts
        name = ts.next()
        if name.kind != "name":
            raise QueryError(f"expected a table name at offset {name.pos}")
        alias = name.text
        if ts.accept("AS"):
            alias = ts.next().text
        elif ts.peek.kind == "name" and not ts.peek.is_kw("WHERE", "JOIN", "INNER", "ON", "GROUP"):
            alias = ts.next().text
        return name.text, alias

    def _operand(self):
        ts = self.ts
        t = ts.peek
        if t.is_kw("DATE") and ts.toks[ts.i + 1].kind == "str":
            ts.next()
            return ("date", ts.next().text)
        if t.kind == "str":
            ts.next()
            return ("str", t.text)
        e = parse_expr(ts)
        return e

    def _conjunction(self):
        ts = self.ts
        out = [self._comparison()]
        while ts.accept("AND"):
            out.append(self._comparison())
        if ts.peek.is_kw("OR"):
            raise QueryError("OR conditions are not supported")
        return out

    def _comparison(self):
        ts = self.ts
        if ts.peek.kind == "op" and ts.peek.text == "(":
            # Only parenthesised single comparisons.
            save = ts.i
            ts.next()
            try:
                c = self._comparison()
                ts.expect(")")
                return c
            except QueryError:
                ts.i = save
        left = self._operand()
        if ts.peek.is_kw("BETWEEN"):
            ts.next()
            lo = self._operand()
            ts.expect("AND")
            hi = self._operand()
            return ("between", left, lo, hi)
        op = ts.next()
        if op.kind != "op" or op.text not in _CMP:
            raise QueryError(f"expected a comparison at offset {op.pos}")
        right = self._operand()
        return (op.text.replace("<>", "!="), left, right)


def _find(uf, x):
    while uf[x] != x:
        uf[x] = uf[uf[x]]
        x = uf[x]
    return x


def parse_query(text: str, schemas: dict) -> QuerySpec:
    """Parse ``text`` against table schemas (``{name: TableSchema}``)."""
    distinct, star, items, tables, conds, group = _Parser(text).parse()

    aliases = {}
    for table, alias in tables:
        if table not in schemas:
            raise QueryError(f"unknown table {table!r}")
        if alias in aliases:
            raise QueryError(f"alias {alias!r} used twice")
        aliases[alias] = schemas[table]

    def resolve(ref: str) -> tuple:
        if "." in ref:
            a, c = ref.split(".", 1)
            if a not in aliases:
                raise QueryError(f"unknown table or alias {a!r}")
            if c not in aliases[a].columns:
                raise QueryError(f"{aliases[a].name} has no column {c!r}")
            return a, c
        hits = [a for a, s in aliases.items() if ref in s.columns]
        if not hits:
            raise QueryError(f"unknown column {ref!r}")
        if len(hits) > 1:
            raise QueryError(f"column {ref!r} is ambiguous; qualify it")
        return hits[0], ref

    def col_of(e) -> tuple | None:
        return resolve(e.ref) if isinstance(e, Col) else None

    # Conditions: cross-table equalities join, the rest select.
    uf = {}
    selections = []
    for cond in conds:
        if cond[0] == "between":
            _, x, lo, hi = cond
            selections += [(">=", x, lo), ("<=", x, hi)]
            continue
        op, left, right = cond
        lc = col_of(left) if isinstance(left, Expr) else None
        rc = col_of(right) if isinstance(right, Expr) else None
        if lc and rc and lc[0] != rc[0]:
            if op != "=":
                raise QueryError(f"non-equality join condition {left} {op} {right} is not supported")
            for c in (lc, rc):
                uf.setdefault(c, c)
            uf[_find(uf, lc)] = _find(uf, rc)
            continue
        selections.append((op, left, right))

    referenced = {a: set() for a in aliases}
    for c in uf:
        referenced[c[0]].add(c[1])

    if star:
        for a, s in aliases.items():
            referenced[a].update(s.columns)

    group_cols = []
    for g in group:
        c = col_of(g)
        if c is None:
            raise QueryError("GROUP BY accepts plain columns only")
        group_cols.append(c)
        referenced[c[0]].add(c[1])

    sel_items = []
    for it in items:
        if it.agg is None:
            c = col_of(it.expr)
            if c is None:
                raise QueryError(f"non-aggregate select item {it.expr} must be a column")
            referenced[c[0]].add(c[1])
            sel_items.append((it, c))
        else:
            sel_items.append((it, None))

    preds_raw = []
    for op, left, right in selections:
        lc = col_of(left) if isinstance(left, Expr) else None
        rc = col_of(right) if isinstance(right, Expr) else None
        if lc is None and rc is None:
            raise QueryError(f"condition {left} {op} {right} mentions no column")
        if lc is None:
            op, left, right, lc, rc = _FLIP[op], right, left, rc, lc
        if isinstance(left, Expr) and not isinstance(left, Col):
            raise QueryError(f"conditions compare plain columns, not {left}")
        referenced[lc[0]].add(lc[1])
        if rc is not None:
            if rc[0] != lc[0]:
                raise QueryError("cross-table comparisons other than equality are not supported")
            referenced[rc[0]].add(rc[1])
        preds_raw.append((op, lc, rc, right))

    # Global attribute names.
    for a, cols in referenced.items():
        for c in cols:
            uf.setdefault((a, c), (a, c))
    classes = {}
    order = {a: i for i, a in enumerate(aliases)}
    for c in sorted(uf, key=lambda c: (order[c[0]], aliases[c[0]].columns.index(c[1]))):
        classes.setdefault(_find(uf, c), []).append(c)
    proposals = {root: members[0][1] for root, members in classes.items()}
    counts = {}
    for v in proposals.values():
        counts[v] = counts.get(v, 0) + 1
    attr_of = {}
    for root, members in classes.items():
        name = proposals[root] if counts[proposals[root]] == 1 else f"{members[0][0]}.{members[0][1]}"
        seen = set()
        for m in members:
            if m[0] in seen:
                raise QueryError(f"two columns of {m[0]} are equated through joins; not supported")
            seen.add(m[0])
            attr_of[m] = name

    relations = []
    for a, s in aliases.items():
        cols = [c for c in s.columns if c in referenced[a]]
        relations.append(RelationSpec(a, tuple(attr_of[(a, c)] for c in cols), s.name, tuple(cols)))

    predicates = {}
    for op, lc, rc, right in preds_raw:
        ltype = aliases[lc[0]].type_of(lc[1])
        if op not in ("=", "!=") and not ltype.ordered:
            raise QueryError(f"string column {lc[1]} supports only = and !=")
        if rc is not None:
            value = attr_of[rc]
        else:
            value, op = _literal(right, ltype, op)
        predicates.setdefault(lc[0], []).append(Comparison(attr_of[lc], op, value))
    predicates = {k: tuple(v) for k, v in predicates.items()}

    is_agg = any(it.agg for it in items) or bool(group)
    comps: list = []

    def component(semiring, polys):
        c = Component(semiring, tuple(sorted(polys.items())))
        if c not in comps:
            comps.append(c)
        return comps.index(c)

    def count_component():
        return component("sum", {})

    def scale_of(ref):
        a, c = ref.split(".", 1)
        return aliases[a].type_of(c).scale

    def qualified(expr):
        return expr.map_refs(lambda r: "{}.{}".format(*resolve(r)))

    out_items = []
    if star:
        for r in relations:
            for attr, col in zip(r.attrs, r.columns):
                if attr not in [i.attr for i in out_items]:
                    out_items.append(OutputItem(attr, "attr", attr=attr))
    for it, c in sel_items:
        if it.agg is None:
            out_items.append(OutputItem(it.label or c[1], "attr", attr=attr_of[c]))
            continue
        expr = qualified(it.expr) if it.expr is not None else None
        label = it.label
        if it.agg == "COUNT":
            out_items.append(OutputItem(label, "value", parts=((count_component(), Fraction(1)),), agg="COUNT", expr=expr))
            continue
        poly = expr.polynomial(scale_of)
        if it.agg in ("SUM", "AVG"):
            parts = []
            for mono, coef in sorted(poly.items()):
                if not mono:
                    parts.append((count_component(), coef))
                    continue
                per = {}
                for ref, power in mono:
                    a, col = ref.split(".", 1)
                    per.setdefault(a, []).append((col, power))
                polys = {a: ((1, tuple(v)),) for a, v in per.items()}
                parts.append((component("sum", polys), coef))
            if it.agg == "SUM":
                out_items.append(OutputItem(label, "value", parts=tuple(parts), agg="SUM", expr=expr))
            else:
                out_items.append(OutputItem(label, "avg", parts=tuple(parts), count=count_component(), agg="AVG", expr=expr))
            continue
        owners = {ref.split(".", 1)[0] for ref in expr.refs()}
        if len(owners) != 1:
            raise QueryError(f"{it.agg} needs an expression over exactly one table")
        (a,) = owners
        d = math.lcm(*(c.denominator for c in poly.values())) if poly else 1
        terms = tuple(
            (int(coef * d), tuple((ref.split(".", 1)[1], p) for ref, p in mono)) for mono, coef in sorted(poly.items())
        )
        idx = component(it.agg.lower(), {a: terms})
        out_items.append(OutputItem(label, "value", parts=((idx, Fraction(1, d)),), agg=it.agg, expr=expr))

    if is_agg:
        gattrs = [attr_of[c] for c in group_cols]
        for it in out_items:
            if it.kind == "attr" and it.attr not in gattrs:
                raise QueryError(f"select column {it.label} is neither grouped nor aggregated")
        output = tuple(dict.fromkeys(gattrs))
        expand = False
        if not output:
            count_component()  # tells an empty join apart from zero aggregates
    else:
        output = tuple(dict.fromkeys(i.attr for i in out_items))
        expand = not distinct
        if expand:
            count_component()
    if is_agg and distinct:
        raise QueryError("DISTINCT with aggregates is not supported")

    extra = {
        "items": tuple(out_items),
        "expand": expand,
        "distinct": bool(distinct),
        "tables": {a: s.name for a, s in aliases.items()},
        "types": {attr_of[(a, c)]: aliases[a].type_of(c) for (a, c) in attr_of},
    }
    return QuerySpec(tuple(relations), output, predicates, tuple(comps), extra)


def _literal(operand, ctype, op):
    """Encode a literal for a comparison against a column of ``ctype``."""
    if isinstance(operand, tuple):
        kind, text = operand
        if kind == "date" and ctype.kind != "date":
            raise QueryError(f"date literal compared with a {ctype} column")
        if kind == "str" and ctype.kind == "str":
            return ctype.encode(text), op
        if kind == "str" and ctype.kind == "date":
            return ctype.encode(text), op
        if kind == "str":
            raise QueryError(f"string literal compared with a {ctype} column")
        return ctype.encode(text), op
    if not isinstance(operand, Num):
        raise QueryError(f"comparison with {operand} is not supported")
    if ctype.kind in ("str", "date"):
        raise QueryError(f"numeric literal compared with a {ctype} column")
    v = operand.value * ctype.scale
    if v.denominator != 1:
        # Finer than the column: round so the comparison keeps its meaning.
        if op in ("<", ">="):
            v = Fraction(math.ceil(v))
        elif op in ("<=", ">"):
            v = Fraction(math.floor(v))
        else:
            raise QueryError(f"literal {operand} is finer than the column scale")
    if v < 0:
        raise QueryError("negative literals are outside the unsigned domain")
    if v > (1 << 64) - 1:
        raise QueryError(f"literal {operand} does not fit 64 bits")
    return int(v), op
