"""Random three-relation instances for the output-size protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rankjoin.planner import JoinTree, compute_output_size
from rankjoin.relation import rank_key

from support import hash_for, random_plain, share_plain

SHAPES = [
    # (root, parent map, schema)
    ("R2", {"R1": "R2", "R2": None, "R3": "R2"}, {"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("C", "D")}),
    ("R1", {"R1": None, "R2": "R1", "R3": "R2"}, {"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("C", "D")}),
    ("R1", {"R1": None, "R2": "R1", "R3": "R1"}, {"R1": ("A", "B", "C"), "R2": ("A", "D"), "R3": ("B", "E")}),
    ("R2", {"R1": "R2", "R2": None, "R3": "R2"}, {"R1": ("A", "B"), "R2": ("A", "B", "C"), "R3": ("C", "D")}),
]


@dataclass
class SizeCase:
    seed: int
    tree: JoinTree
    plains: dict
    expect: int

    def program(self, ctx):
        rels = {name: share_plain(ctx, i % 3, p) for i, (name, p) in enumerate(sorted(self.plains.items()))}
        return compute_output_size(ctx, self.tree, rels)


def join_size(tree: JoinTree, plains: dict) -> int:
    rows = [dict()]
    for name in tree.pre_order():
        p = plains[name]
        nxt = []
        for acc in rows:
            for r, _ in p.real():
                d = dict(zip(p.attrs, r))
                if all(acc.get(k, v) == v for k, v in d.items()):
                    nxt.append({**acc, **d})
        rows = nxt
    return len(rows)


def size_case(seed, n_max=16, sizes=None) -> SizeCase:
    rng = np.random.default_rng(seed)
    root, parent, schema = SHAPES[seed % len(SHAPES)]
    tree = JoinTree.build(root, parent, schema)
    plains = {}
    for name, attrs in schema.items():
        n = sizes[name] if sizes else int(rng.integers(0, n_max + 1))
        # Relations are sets; duplicate real rows become dummies.
        plains[name] = random_plain(rng, n, attrs, domain=3, distinct_on=attrs)
    h = hash_for(max(p.n for p in plains.values()), seed)
    for name in schema:
        keys = set()
        if parent[name] is not None:
            keys.add(rank_key(tree.edge_keys(name)))
        for c in tree.children(name):
            keys.add(rank_key(tree.edge_keys(c)))
        plains[name].rank(h, sorted(keys))
    return SizeCase(seed, tree, plains, join_size(tree, plains))
