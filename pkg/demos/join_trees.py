"""How the planner picks a join tree.

A four-relation acyclic query has several join trees.  Some are not
free-connex for the requested output and are rejected; the rest are priced
by the symbolic cost model and the cheapest one wins.
"""

from rankjoin.planner import QuerySpec, build_join_trees, choose_plan, compile_plan, is_free_connex

SCHEMA = {"R1": ("A", "B"), "R2": ("A", "D", "E"), "R3": ("B", "C", "F"), "R4": ("C", "F", "G")}


def show(output):
    spec = QuerySpec.simple(SCHEMA, tuple(output))
    print(f"output attributes {{{','.join(output) or ''}}}")
    for tree in build_join_trees(spec):
        if is_free_connex(tree, spec.output):
            print(f"  {tree.encoding():18} cost {compile_plan(tree, spec).cost}")
        else:
            print(f"  {tree.encoding():18} rejected: not free-connex")
    plan = choose_plan(spec, dict.fromkeys(SCHEMA, 1000))
    print(f"chosen with 1000 rows per relation:\n{plan.describe()}\n")


if __name__ == "__main__":
    show("ABCDE")
    show("ABCD")
    show("")
