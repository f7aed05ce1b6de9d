import numpy as np
import pytest

from rankjoin import operators as O
from rankjoin.consistent_sort import TableHash
from rankjoin.primitives import SizeViolation
from rankjoin.relation import open_relation, public_relation

import worked as F
from operator_cases import KINDS, MAKERS, run_cases
from support import hash_for, rank_problems, run, u64


def opened(build, backend="dealer"):
    def prog(ctx):
        return open_relation(ctx, build(ctx))

    return run(prog, backend=backend)[0]


def survivors(o, col):
    return sorted(int(v) for v, m in zip(o["columns"][col], o["marker"]) if m)


# ---------------------------------------------------------------- select --

SIX = {"id": u64(1, 2, 3, 4, 5, 6), "amount": u64(5000, 12000, 40000, 900, 25000, 31000)}
SIX_RANKS = {("id",): u64(3, 1, 6, 2, 5, 4)}


def test_select_true_keeps_everything():
    o = opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX, ranks=SIX_RANKS), []))
    assert o["marker"].tolist() == [1] * 6
    assert sorted(o["ranks"][("id",)].tolist()) == list(range(1, 7))


def test_select_deposit_range():
    preds = [O.Comparison("amount", ">=", 10000), O.Comparison("amount", "<=", 30000)]
    o = opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX, ranks=SIX_RANKS), preds))
    assert o["marker"].tolist() == [0, 1, 0, 0, 1, 0]
    assert sorted(o["ranks"][("id",)][[1, 4]].tolist()) == [1, 2]
    # Survivors keep their relative order: row 2 had rank 1, row 5 rank 5.
    assert o["ranks"][("id",)][[1, 4]].tolist() == [1, 2]


def test_select_false_dummies_all():
    preds = [O.Comparison("id", "<", 0)]
    o = opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX, ranks=SIX_RANKS), preds))
    assert o["marker"].tolist() == [0] * 6
    assert sorted(o["ranks"][("id",)].tolist()) == list(range(1, 7))


def test_select_column_against_column():
    preds = [O.Comparison("id", "<", "amount")]
    o = opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX, ranks=SIX_RANKS), preds))
    assert o["marker"].tolist() == [1] * 6


def test_select_unknown_column():
    with pytest.raises(KeyError):
        opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX), [O.Comparison("zip", "=", 1)]))


def test_select_unknown_operator():
    with pytest.raises(ValueError):
        opened(lambda ctx: O.select(ctx, public_relation(ctx, SIX), [O.Comparison("id", "~", 1)]))


# ----------------------------------------------------------- update_ranks --

def test_update_ranks_middle_row_dummied():
    h = TableHash({10: 1, 20: 0, 30: 2}, buckets=4)
    cols = {"K": u64(10, 20, 30)}
    # Old ranks follow the hash order: 20, 10, 30.
    o = opened(lambda ctx: O.update_ranks(ctx, public_relation(ctx, cols, marker=u64(1, 0, 1), ranks={("K",): u64(2, 1, 3)})))
    assert o["ranks"][("K",)].tolist() == [1, 3, 2]
    assert rank_problems(o, h) == []


def test_update_ranks_no_dummies_is_identity():
    o = opened(lambda ctx: O.update_ranks(ctx, public_relation(ctx, SIX, ranks=SIX_RANKS)))
    assert o["ranks"][("id",)].tolist() == SIX_RANKS[("id",)].tolist()


# --------------------------------------------------------------- group by --

def test_group_single_sum():
    cols = {"g": u64(4, 4, 4), "v": u64(1, 2, 3)}
    o = opened(lambda ctx: O.group_by_agg(ctx, public_relation(ctx, cols, ranks={("g",): u64(1, 2, 3)}), ["g"], "sum", "v", output="s"))
    assert [int(s) for s, m in zip(o["columns"]["s"], o["marker"]) if m] == [6]


def test_group_two_groups():
    x, y = 1, 2
    cols = {"g": u64(x, y, x), "v": u64(2, 7, 5)}
    o = opened(lambda ctx: O.group_by_agg(ctx, public_relation(ctx, cols, ranks={("g",): u64(1, 3, 2)}), ["g"], "sum", "v", output="s"))
    rows = sorted((int(g), int(s)) for g, s, m in zip(o["columns"]["g"], o["columns"]["s"], o["marker"]) if m)
    assert rows == [(x, 7), (y, 7)]


def test_group_count_on_worked_relation():
    def build(ctx):
        _, s = F.join_relations(ctx)
        return O.group_by_agg(ctx, s, ["B"], "count", output="cnt")

    o = opened(build)
    counts = {int(b): int(c) for b, c, m in zip(o["columns"]["B"], o["columns"]["cnt"], o["marker"]) if m}
    assert counts == {1: 2, 2: 1, 3: 2, 5: 1, 6: 1}
    assert 4 not in counts


def test_group_by_annotation_sum():
    cols = {"g": u64(1, 1, 2)}

    def build(ctx):
        rel = public_relation(ctx, cols, ranks={("g",): u64(1, 2, 3)}, annotation=u64(3, 4, 5).reshape(1, 3), semiring=("sum",))
        return O.group_by_agg(ctx, rel, ["g"])

    o = opened(build)
    rows = sorted((int(g), int(a)) for g, a, m in zip(o["columns"]["g"], o["annotation"][0], o["marker"]) if m)
    assert rows == [(1, 7), (2, 5)]


def test_group_by_needs_rank():
    with pytest.raises(KeyError):
        opened(lambda ctx: O.group_by_agg(ctx, public_relation(ctx, SIX), ["id"]))


def test_unknown_aggregate():
    with pytest.raises(ValueError):
        opened(lambda ctx: O.group_by_agg(ctx, public_relation(ctx, SIX), [], "median", "amount"))


# ---------------------------------------------------------------- project --

def test_project_drops_ranks_over_dropped_keys():
    def build(ctx):
        r, _ = F.join_relations(ctx)
        return O.project(r, ["A"])

    o = opened(build)
    assert list(o["columns"]) == ["A"] and list(o["ranks"]) == [("A",)]
    assert o["columns"]["A"].tolist() == F.JOIN_R["A"].tolist()


def test_project_unknown_attribute():
    with pytest.raises(KeyError):
        opened(lambda ctx: O.project(public_relation(ctx, SIX), ["zip"]))


# -------------------------------------------------------------- semi-join --

def _keyed(ctx, keys, name="K"):
    keys = np.asarray(keys, np.uint64)
    h = hash_for(8, 0)
    from rankjoin.consistent_sort import consistent_sort

    ranks = consistent_sort(keys.tolist(), h).ranks
    return public_relation(ctx, {name: keys, "row": np.arange(keys.size, dtype=np.uint64)}, ranks={(name,): ranks})


def test_semi_join_example():
    def build(ctx):
        r = _keyed(ctx, [1, 2, 2, 3])
        s = _keyed(ctx, [2, 2, 4]).project(["K"])
        return O.semi_join(ctx, r, s)

    o = opened(build, backend="mpc")
    assert survivors(o, "row") == [1, 2]
    assert rank_problems(o, hash_for(8, 0)) == []


def test_semi_join_disjoint():
    o = opened(lambda ctx: O.semi_join(ctx, _keyed(ctx, [1, 2]), _keyed(ctx, [3, 4, 5]).project(["K"])))
    assert survivors(o, "row") == []


def test_semi_join_superset():
    o = opened(lambda ctx: O.semi_join(ctx, _keyed(ctx, [1, 2, 3]), _keyed(ctx, [3, 2, 1, 0]).project(["K"])))
    assert survivors(o, "row") == [0, 1, 2]


def test_semi_join_without_common_attributes():
    with pytest.raises(ValueError):
        opened(lambda ctx: O.semi_join(ctx, _keyed(ctx, [1], "K").project(["K"]), _keyed(ctx, [1], "L").project(["L"])))


# ------------------------------------------------------------------- join --

def test_join_worked_example():
    rows, marker = run(F.join_program, backend="mpc")[0]
    assert rows == F.JOIN_OUT
    assert marker == [1] * 10


def test_join_without_matches():
    o = opened(lambda ctx: O.join(ctx, _keyed(ctx, [1, 2]), _keyed(ctx, [3, 4], "K").project(["K"]), 4))
    assert o["marker"].tolist() == [0, 0, 0, 0]
    assert all(r.tolist() == [1, 2, 3, 4] for r in o["ranks"].values())


def test_join_primary_keys():
    def build(ctx):
        s = _keyed(ctx, [5, 1, 4, 2])
        s = s.replace(columns={"K": s.columns["K"], "other": s.columns["row"]})
        return O.join(ctx, _keyed(ctx, [5, 1, 4, 2]), s, 4)

    o = opened(build)
    assert o["marker"].tolist() == [1] * 4
    assert sorted(zip(o["columns"]["row"].tolist(), o["columns"]["other"].tolist())) == [(i, i) for i in range(4)]


def test_join_bound_too_small():
    with pytest.raises(SizeViolation):
        opened(lambda ctx: O.join(ctx, _keyed(ctx, [1, 1]), _keyed(ctx, [1, 1], "K").project(["K"]), 3))


def test_join_annotations_multiply():
    def build(ctx):
        r = public_relation(ctx, {"K": u64(1, 2)}, ranks={("K",): u64(1, 2)}, annotation=u64(3, 5).reshape(1, 2), semiring=("sum",))
        s = public_relation(ctx, {"K": u64(2, 1)}, ranks={("K",): u64(2, 1)}, annotation=u64(7, 11).reshape(1, 2), semiring=("sum",))
        return O.join(ctx, r, s, 2)

    o = opened(build)
    assert sorted(zip(o["columns"]["K"].tolist(), o["annotation"][0].tolist())) == [(1, 33), (2, 35)]


# --------------------------------------------------------- random batches --

@pytest.mark.parametrize("kind", KINDS)
def test_random_instances_dealer(kind):
    cases = [MAKERS[kind](seed, n_max=64) for seed in range(10_000, 10_030)]
    assert run_cases(cases, "dealer") == []


@pytest.mark.parametrize("kind", KINDS)
def test_random_instances_mpc(kind):
    cases = [MAKERS[kind](seed, n_max=32) for seed in range(20_000, 20_008)]
    assert run_cases(cases, "mpc") == []
