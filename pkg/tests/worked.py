"""The small worked instances used by the primitive, operator and acceptance tests."""

import numpy as np

from rankjoin import circuits as C
from rankjoin import operators as O
from rankjoin import primitives as P
from rankjoin.planner import QuerySpec, build_join_trees
from rankjoin.relation import open_relation, public_relation


def u64(*vals):
    return np.array(vals, dtype=np.uint64)


# Letters a..f as words; 0 with marker 0 stands for a dummy.
a, b, c, d, e, f = range(1, 7)

# Extended intersection: X has a run of b's and a dummy.
ISECT_X = u64(a, b, b, 0, c)
ISECT_XMARK = u64(1, 1, 1, 0, 1)
ISECT_Y = u64(b, c, d, e, f)
ISECT_V = u64(1, 2, 3, 4, 5)
ISECT_T = [0, 1, 1, 0, 2]


def isect_program(ctx):
    t = P.extended_intersection(
        ctx,
        C.public(ctx, ISECT_X),
        C.public(ctx, ISECT_XMARK),
        C.public(ctx, ISECT_Y),
        C.public(ctx, np.ones(5, np.uint64)),
        C.public(ctx, ISECT_V),
    )
    return C.reveal(ctx, t).tolist()


# Join of R(A, B) and S(B, C), seven rows each, ten output rows.
JOIN_R = {"A": u64(1, 1, 1, 2, 2, 3, 3), "B": u64(1, 2, 4, 1, 3, 1, 2)}
JOIN_R_RANKS = {("A",): u64(1, 2, 3, 4, 5, 6, 7), ("B",): u64(1, 4, 7, 2, 6, 3, 5)}
JOIN_S = {"B": u64(1, 1, 2, 3, 3, 5, 6), "C": u64(1, 2, 2, 1, 2, 2, 1)}
JOIN_S_RANKS = {("B",): u64(1, 2, 3, 4, 5, 6, 7), ("C",): u64(1, 4, 5, 2, 6, 7, 3)}
# (A, B, C, rank_A, rank_B, rank_C) in output order.
JOIN_OUT = [
    (1, 1, 1, 1, 1, 1), (1, 1, 2, 2, 2, 5), (2, 1, 1, 4, 3, 2), (2, 1, 2, 5, 4, 6), (3, 1, 1, 8, 5, 3),
    (3, 1, 2, 9, 6, 7), (1, 2, 2, 3, 7, 8), (3, 2, 2, 10, 8, 9), (2, 3, 1, 6, 9, 4), (2, 3, 2, 7, 10, 10),
]


def join_relations(ctx):
    return (public_relation(ctx, JOIN_R, ranks=JOIN_R_RANKS), public_relation(ctx, JOIN_S, ranks=JOIN_S_RANKS))


def join_program(ctx):
    r, s = join_relations(ctx)
    o = open_relation(ctx, O.join(ctx, r, s, 10))
    rows = []
    for i in range(10):
        rows.append(tuple(int(o["columns"][x][i]) for x in "ABC") + tuple(int(o["ranks"][(x,)][i]) for x in "ABC"))
    return rows, o["marker"].tolist()


# Expansion with ranks, n = 4 and m = 7.
EXPAND_IN = {"A": u64(3, 2, 1, 4), "B": u64(2, 4, 3, 1)}
EXPAND_RANKS = {("A",): u64(3, 2, 1, 4), ("B",): u64(2, 4, 3, 1)}
EXPAND_DEGREE = u64(3, 0, 2, 1)
EXPAND_A = [3, 3, 3, 1, 1, 4]
EXPAND_MARKER = [1, 1, 1, 1, 1, 1, 0]
EXPAND_RANK_A = [3, 4, 5, 1, 2, 6, 7]
EXPAND_RANK_B = [2, 3, 4, 5, 6, 1, 7]


def expand_program(ctx):
    rel = public_relation(ctx, EXPAND_IN, ranks=EXPAND_RANKS)
    o = open_relation(ctx, P.expansion_with_ranks(ctx, rel, C.public(ctx, EXPAND_DEGREE), 7))
    return {
        "A": o["columns"]["A"][:6].tolist(),
        "marker": o["marker"].tolist(),
        "rank_A": o["ranks"][("A",)].tolist(),
        "rank_B": o["ranks"][("B",)].tolist(),
    }


# Cost-model query over four relations and three of its join trees.
FOUR_WAY = {"R1": ("A", "B"), "R2": ("A", "D", "E"), "R3": ("B", "C", "F"), "R4": ("C", "F", "G")}
LEFT, RIGHT, LINE = "R1(R2,R3(R4))", "R3(R1(R2),R4)", "R2(R1(R3(R4)))"

# Table rows as (operation, cost) for the semi-join and final-join phases.
LEFT_ROWS = [
    ("R1(A,B;rank_A,rank_B) semi-join R2(A,D,E;rank_A)", 4, "n"),
    ("R1(A,B;rank_A,rank_B) semi-join R3(B,C;rank_B)", 4, "n"),
    ("R2(A,D,E;rank_A) semi-join R1(A,B;rank_A,rank_B)", 4, "n"),
    ("R3(B,C;rank_B) semi-join R1(A,B;rank_A,rank_B)", 3, "n"),
    ("R1(A,B;rank_A,rank_B) join R2(A,D,E;rank_A)", 8, "m"),
    ("R1(A,B,D,E;rank_B) join R3(B,C;rank_B)", 8, "m"),
]
LINE_ROWS = [
    ("R1(A,B;rank_A,rank_B) semi-join R3(B,C;rank_B)", 4, "n"),
    ("R2(A,D,E;rank_A) semi-join R1(A,B;rank_A,rank_B)", 4, "n"),
    ("R1(A,B;rank_A,rank_B) semi-join R2(A,D,E;rank_A)", 4, "n"),
    ("R3(B,C;rank_B) semi-join R1(A,B;rank_A,rank_B)", 3, "n"),
    ("R1(A,B;rank_A,rank_B) join R3(B,C;rank_B)", 7, "m"),
    ("R2(A,D,E;rank_A) join R1(A,B,C;rank_A)", 8, "m"),
]


def four_way(output="ABCDE"):
    return QuerySpec.simple(FOUR_WAY, tuple(output))


def tree_of(q, enc):
    (t,) = [t for t in build_join_trees(q) if t.encoding() == enc]
    return t


def table_rows(plan):
    rows = []
    for s in plan.steps:
        if s.phase in ("semijoin", "join"):
            label = s.label.rsplit("  [", 1)[0]
            rows.append((label, s.units, "m" if s.scale == "m" else "n"))
    return rows


