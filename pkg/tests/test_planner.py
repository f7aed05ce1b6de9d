import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankjoin.operators import Comparison
from rankjoin.planner import (
    PlanError,
    QuerySpec,
    build_join_trees,
    choose_plan,
    compile_plan,
    estimate_cost,
    is_free_connex,
)

from worked import FOUR_WAY, LEFT, LEFT_ROWS, LINE, LINE_ROWS, RIGHT, four_way, table_rows, tree_of
from size_cases import size_case
from support import run

def test_fig4_trees_enumerated():
    encs = [t.encoding() for t in build_join_trees(four_way())]
    assert LEFT in encs and RIGHT in encs and LINE in encs
    assert all(t.is_connected() for t in build_join_trees(four_way()))


def test_triangle_is_cyclic():
    tri = QuerySpec.simple({"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("A", "C")}, ())
    assert build_join_trees(tri) == []
    with pytest.raises(PlanError):
        choose_plan(tri, {"R1": 1, "R2": 1, "R3": 1})


def test_single_relation_tree():
    q = QuerySpec.simple({"R": ("A", "B")}, ("A",))
    (t,) = build_join_trees(q)
    assert t.encoding() == "R"
    plan = compile_plan(t, q)
    assert [s.op for s in plan.steps] == ["group_by", "result"]


def test_cross_product_has_no_tree():
    q = QuerySpec.simple({"R": ("A",), "S": ("B",)}, ())
    assert build_join_trees(q) == []


def test_free_connex_classification():
    q = four_way()
    assert is_free_connex(tree_of(q, LEFT), "ABCD")
    assert not is_free_connex(tree_of(q, RIGHT), "ABCD")
    for t in build_join_trees(q):
        assert is_free_connex(t, "ABCDEFG")
        assert is_free_connex(t, "")


@pytest.mark.parametrize("enc,rows,total", [(LEFT, LEFT_ROWS, (15, 16)), (LINE, LINE_ROWS, (15, 15))])
def test_cost_table(enc, rows, total):
    q = four_way()
    plan = compile_plan(tree_of(q, enc), q)
    assert table_rows(plan) == rows
    assert plan.cost.phases("semijoin", "join") == total


def test_cost_is_sum_of_entries():
    q = four_way()
    cost = estimate_cost(tree_of(q, LEFT), q)
    assert cost.c_n == sum(u for _, _, u, s in cost.entries if s.startswith("n:"))
    assert cost.c_m == sum(u for _, _, u, s in cost.entries if s == "m")
    assert str(cost) == f"{cost.c_n}n + {cost.c_m}m"


def test_worked_plan_steps():
    q = four_way()
    plan = compile_plan(tree_of(q, LEFT), q)
    main = [(s.op, s.target, s.source, s.keys) for s in plan.steps if s.phase != "outsize"]
    assert main == [
        ("group_by", "R4", None, ("C", "F")),
        ("merge", "R3", "R4", ("C", "F")),
        ("group_by", "R3", None, ("B", "C")),
        ("semi_join", "R1", "R2", ("A",)),
        ("semi_join", "R1", "R3", ("B",)),
        ("semi_join", "R2", "R1", ("A",)),
        ("semi_join", "R3", "R1", ("B",)),
        ("join", "R1", "R2", ("A",)),
        ("join", "R1", "R3", ("B",)),
        ("result", "R1", None, ()),
    ]
    assert plan.needs_m


def test_not_free_connex_rejected():
    q = four_way("ABCD")
    with pytest.raises(PlanError):
        compile_plan(tree_of(q, RIGHT), q)
    with pytest.raises(PlanError):
        choose_plan(q, dict.fromkeys(FOUR_WAY, 10), tree=RIGHT)


Q3 = {
    "customer": ("c_custkey", "c_mktsegment"),
    "orders": ("o_orderkey", "c_custkey", "o_orderdate", "o_shippriority"),
    "lineitem": ("o_orderkey", "l_extendedprice", "l_discount", "l_shipdate"),
}


def test_q3_plan_is_reduce_only():
    q = QuerySpec.simple(Q3, ("o_orderkey", "o_orderdate", "o_shippriority"))
    q = QuerySpec(q.relations, q.output, {"customer": (Comparison("c_mktsegment", "=", 1),)}, q.components)
    plan = compile_plan(tree_of(q, "orders(customer,lineitem)"), q)
    phases = {s.phase for s in plan.steps}
    assert phases <= {"select", "reduce", "result"}
    assert not plan.needs_m
    assert plan.result == "orders"
    assert plan.initial_ranks["customer"] == (("c_custkey",),)


def test_empty_output_ends_in_reduce():
    q = four_way("")
    for t in build_join_trees(q):
        plan = compile_plan(t, q)
        assert {s.phase for s in plan.steps} <= {"reduce", "result"}
        assert plan.steps[-2].op == "group_by" and plan.steps[-2].keys == ()


def test_plan_serialization_is_deterministic():
    q = four_way()
    a = choose_plan(q, dict.fromkeys(FOUR_WAY, 100))
    b = choose_plan(q, dict.fromkeys(FOUR_WAY, 100))
    assert a.to_json() == b.to_json() and a.digest() == b.digest()
    assert a.describe().splitlines()[0].startswith("tree ")


def test_choose_plan_prefers_the_cheaper_tree():
    q = four_way()
    sizes = dict.fromkeys(FOUR_WAY, 1000)
    best = choose_plan(q, sizes, m_hint=1000)
    costs = {
        t.encoding(): compile_plan(t, q).cost.evaluate(sizes, 1000)
        for t in build_join_trees(q)
        if is_free_connex(t, q.output)
    }
    assert costs[best.tree.encoding()] == min(costs.values())
    assert choose_plan(q, sizes, tree=LEFT).tree.encoding() == LEFT


@given(st.dictionaries(st.sampled_from(sorted(FOUR_WAY)), st.integers(1, 10_000), min_size=4, max_size=4),
       st.integers(0, 10_000), st.integers(1, 50))
def test_argmin_invariant_under_scaling(sizes, m, k):
    q = four_way()
    a = choose_plan(q, sizes, m_hint=m)
    b = choose_plan(q, {r: k * n for r, n in sizes.items()}, m_hint=k * m)
    assert a.tree.encoding() == b.tree.encoding()


def test_duplicate_relation_names_rejected():
    with pytest.raises(PlanError):
        QuerySpec.simple({"R": ("A", "A")}, ())


def test_unknown_output_attribute_rejected():
    with pytest.raises(PlanError):
        QuerySpec.simple({"R": ("A",)}, ("Z",))


# ------------------------------------------------------------ output size --

def test_output_size_empty_database():
    case = size_case(0, sizes={"R1": 0, "R2": 0, "R3": 0})
    assert case.expect == 0
    assert run(case.program)[0] == 0


@pytest.mark.parametrize("seed", range(8))
def test_output_size_matches_join(seed):
    case = size_case(seed)
    assert run(case.program, backend="mpc" if seed < 4 else "dealer")[0] == case.expect
