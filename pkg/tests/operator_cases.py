"""Random operator instances with plaintext expectations.

Each case knows how to run itself inside a party session and what the
opened output must contain.  Batches of cases share one session so the
suites spend their time in the protocols rather than thread start-up.
"""

from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass

import numpy as np

from rankjoin import operators as O
from rankjoin.relation import open_relation

from support import MASK, Plain, hash_for, natural_join, random_plain, rank_problems, real_rows, share_plain

_CMP = {"=": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
KINDS = ("select", "group_by", "semi_join", "join")


@dataclass
class Case:
    kind: str
    seed: int
    inputs: list  # Plain relations, shared by parties 1 and 2
    params: dict
    expect: Counter
    attrs: tuple  # output columns compared, in order
    h: object

    def program(self, ctx):
        rels = [share_plain(ctx, i % 2, p) for i, p in enumerate(self.inputs)]
        p = self.params
        if self.kind == "select":
            out = O.select(ctx, rels[0], p["predicates"])
        elif self.kind == "group_by":
            out = O.group_by_agg(ctx, rels[0], p["keys"], p["agg"], p["target"], output="agg")
        elif self.kind == "semi_join":
            out = O.semi_join(ctx, rels[0], rels[1], pull_annotation=p["pull"])
        else:
            out = O.join(ctx, rels[0], rels[1], p["m"])
        return open_relation(ctx, out)

    def output_problems(self, opened) -> list:
        problems = []
        got = real_rows(opened, self.attrs)
        if got != self.expect:
            problems.append(f"{self.kind} seed {self.seed}: output {sorted(got.items())} != {sorted(self.expect.items())}")
        if self.kind == "join" and opened["marker"].size != self.params["m"]:
            problems.append(f"join seed {self.seed}: size {opened['marker'].size} != m")
        return problems

    def rank_problems(self, opened) -> list:
        return [f"{self.kind} seed {self.seed}: {p}" for p in rank_problems(opened, self.h)]

    def check(self, opened) -> list:
        return self.output_problems(opened) + self.rank_problems(opened)


def _sizes(rng, n_max):
    # Mostly small, occasionally up to n_max.
    if rng.random() < 0.1:
        return int(rng.integers(1, n_max + 1))
    return int(rng.integers(1, min(n_max, 24) + 1))


def select_case(seed, n_max=256) -> Case:
    rng = np.random.default_rng(seed)
    n = _sizes(rng, n_max)
    h = hash_for(n, seed)
    R = random_plain(rng, n, ("A", "B", "C"), domain=6).rank(h, [("A",), ("B",), ("A", "C")])
    preds = []
    for _ in range(int(rng.integers(1, 3))):
        col = str(rng.choice(["A", "B", "C"]))
        op = str(rng.choice(list(_CMP)))
        right = str(rng.choice(["A", "B", "C"])) if rng.random() < 0.2 else int(rng.integers(0, 6))
        preds.append(O.Comparison(col, op, right))

    def ok(row):
        d = dict(zip(R.attrs, row))
        return all(_CMP[p.op](d[p.left], d[p.right] if isinstance(p.right, str) else p.right) for p in preds)

    expect = Counter(r + (a,) for r, a in R.real() if ok(r))
    return Case("select", seed, [R], {"predicates": preds}, expect, R.attrs, h)


_IDENT = {"sum": 0, "count": 0, "max": 0, "min": MASK}


def group_by_case(seed, n_max=256) -> Case:
    rng = np.random.default_rng(seed)
    n = _sizes(rng, n_max)
    h = hash_for(n, seed)
    R = random_plain(rng, n, ("A", "B", "C"), domain=4).rank(h, [("A",), ("A", "B"), ("C",)])
    keys = [("A",), ("A", "B"), ()][int(rng.integers(0, 3))]
    agg = [None, "count", "sum", "max", "min"][int(rng.integers(0, 5))]
    target = "C" if agg in ("sum", "max", "min") else None
    groups: dict = {}
    for r, a in R.real():
        d = dict(zip(R.attrs, r))
        groups.setdefault(tuple(d[k] for k in keys), []).append((d, a))
    if not keys and not groups:
        groups[()] = []
    expect = Counter()
    for key, members in groups.items():
        ann = sum(a for _, a in members) & MASK
        row = key + (ann,)
        if agg == "count":
            row = key + (len(members), ann)
        elif agg == "sum":
            row = key + (sum(d["C"] for d, _ in members) & MASK, ann)
        elif agg in ("max", "min"):
            vals = [d["C"] for d, _ in members]
            row = key + ((max if agg == "max" else min)(vals, default=_IDENT[agg]), ann)
        expect[row] += 1
    attrs = tuple(keys) + (("agg",) if agg else ())
    return Case("group_by", seed, [R], {"keys": list(keys), "agg": agg, "target": target}, expect, attrs, h)


def semi_join_case(seed, n_max=256) -> Case:
    rng = np.random.default_rng(seed)
    nr, ns = _sizes(rng, n_max), _sizes(rng, n_max)
    h = hash_for(max(nr, ns), seed)
    two = rng.random() < 0.3
    key = ("B", "C") if two else ("B",)
    pull = bool(rng.random() < 0.5)
    R = random_plain(rng, nr, ("A", "B", "C"), domain=4)
    S = random_plain(rng, ns, ("B", "C", "D") if two else ("B", "D", "E"), domain=4, distinct_on=key if pull else None)
    R.rank(h, [key, ("A",)])
    S.rank(h, [key])
    s_keys: dict = {}
    for s, a in S.real():
        d = dict(zip(S.attrs, s))
        s_keys[tuple(d[k] for k in key)] = a
    expect = Counter()
    for r, a in R.real():
        d = dict(zip(R.attrs, r))
        k = tuple(d[x] for x in key)
        if k in s_keys:
            expect[r + (((a * s_keys[k]) & MASK) if pull else a,)] += 1
    return Case("semi_join", seed, [R, S], {"pull": pull}, expect, R.attrs, h)


def join_case(seed, n_max=256) -> Case:
    rng = np.random.default_rng(seed)
    nr, ns = _sizes(rng, n_max), _sizes(rng, n_max)
    h = hash_for(max(nr, ns), seed)
    two = rng.random() < 0.3
    key = ("B", "C") if two else ("B",)
    # Larger domains keep join sizes near n.
    dom = max(3, int(np.sqrt(max(nr, ns))) + 2)
    R = random_plain(rng, nr, ("A", "B", "C"), domain=dom)
    S = random_plain(rng, ns, ("B", "C", "D") if two else ("B", "D", "E"), domain=dom)
    R.rank(h, [key, ("A",)])
    S.rank(h, [key, ("D",)])
    expect, attrs = natural_join(R, S)
    m = sum(expect.values()) + int(rng.integers(0, 4))
    return Case("join", seed, [R, S], {"m": m}, expect, attrs, h)


MAKERS = {"select": select_case, "group_by": group_by_case, "semi_join": semi_join_case, "join": join_case}


def run_opened(cases, backend="dealer") -> list:
    """Run cases in one session; returns party 1's opened outputs."""
    from rankjoin.runtime import SessionConfig, run_three

    def prog(ctx):
        return [c.program(ctx) for c in cases]

    return run_three(prog, SessionConfig(backend=backend))[0]


def run_cases(cases, backend="dealer") -> list:
    """Run cases in one session per call; returns all problems found."""
    problems = []
    for c, opened in zip(cases, run_opened(cases, backend)):
        problems += c.check(opened)
    return problems
