"""Synthetic workloads with a chosen input size and join size, and a cost sweep.

The chain workload joins ``R1(a, b)``, ``R2(b, c)`` and ``R3(c, d)``, one
table per party.  Its full join is built from independent blocks: block
``j`` holds ``x_j`` rows of ``R1`` with ``b = j``, one ``R2`` row
``(j, j)`` and ``y_j`` rows of ``R3`` with ``c = j``, so it contributes
``x_j * y_j`` output rows.  Leftover rows use fresh keys that join nothing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from rankjoin.engine.driver import run_query
from rankjoin.engine.sql import parse_query
from rankjoin.engine.tables import ColumnType, Database, PlainTable, TableSchema
from rankjoin.planner import QuerySpec
from rankjoin.runtime import SessionConfig

CHAIN_SQL = "SELECT * FROM R1, R2, R3 WHERE R1.b = R2.b AND R2.c = R3.c"


def chain_schemas() -> dict:
    cols = {"R1": ("a", "b"), "R2": ("b", "c"), "R3": ("c", "d")}
    return {
        name: TableSchema(name, c, (ColumnType("int"),) * 2, owner=i + 1)
        for i, (name, c) in enumerate(cols.items())
    }


def chain_query() -> QuerySpec:
    return parse_query(CHAIN_SQL, chain_schemas())


def _blocks(n: int, m: int) -> list:
    """Factor ``m`` into block products ``x * y`` using at most ``n`` rows per side."""
    out, left_x, left_y, rest = [], n, n, m
    while rest:
        x = min(max(1, math.isqrt(rest)), left_x)
        y = min(rest // x, left_y) if x else 0
        if y == 0 or len(out) == n:
            raise ValueError(f"cannot build a join of size {m} from {n} rows per table")
        out.append((x, y))
        left_x, left_y, rest = left_x - x, left_y - y, rest - x * y
    return out


def chain_database(n: int, m: int, seed: int = 0) -> Database:
    """Three ``n``-row tables whose full join has exactly ``m`` rows."""
    rng = np.random.default_rng(seed)
    blocks = _blocks(n, m)
    fresh = iter(range(len(blocks) + 1, 1 << 40))
    r1, r2, r3 = [], [], []
    for j, (x, y) in enumerate(blocks, start=1):
        r1 += [(i, j) for i in range(x)]
        r2.append((j, j))
        r3 += [(j, i) for i in range(y)]
    # Filler keys are fresh, so these rows dangle.
    r1 += [(0, next(fresh)) for _ in range(n - len(r1))]
    r2 += [(next(fresh), next(fresh)) for _ in range(n - len(r2))]
    r3 += [(next(fresh), 0) for _ in range(n - len(r3))]
    schemas = chain_schemas()
    tables = {}
    for name, rows in zip(schemas, (r1, r2, r3)):
        arr = np.array(rows, dtype=np.uint64).reshape(n, 2)
        tables[name] = PlainTable(schemas[name], arr[rng.permutation(n)])
    return Database(schemas, tables)


@dataclass(frozen=True)
class SizePoint:
    n: int
    m: int
    bytes: int
    rounds: int
    wall: float


@dataclass
class BenchReport:
    points: list = field(default_factory=list)
    # bytes ~ coef[0] * n + coef[1] * m + coef[2]
    coef: tuple | None = None
    residuals: list = field(default_factory=list)  # relative to the measured bytes

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def as_text(self) -> str:
        lines = ["n m bytes rounds wall_seconds residual"]
        res = self.residuals or [float("nan")] * len(self.points)
        for p, r in zip(self.points, res):
            lines.append(f"{p.n} {p.m} {p.bytes} {p.rounds} {p.wall:.3f} {r:+.5f}")
        if self.coef is not None:
            terms = " + ".join(f"{v:.2f}*{name}" for v, name in zip(self.coef, "nm") if not math.isnan(v))
            c = self.coef[2]
            lines.append(f"fit bytes = {terms} {'-' if c < 0 else '+'} {abs(c):.1f}")
        return "\n".join(lines) + "\n"


def fit_affine(points) -> tuple:
    """Least-squares ``bytes = a*n + b*m + c``; returns ``(coef, relative residuals)``.

    A size that is constant over ``points`` cannot be told apart from the
    intercept, so it is folded into ``c`` and its coefficient is NaN.
    """
    sizes = np.array([[p.n, p.m] for p in points], dtype=float).reshape(-1, 2)
    varying = [j for j in range(2) if np.ptp(sizes[:, j]) > 0] if len(points) else []
    X = np.column_stack([sizes[:, varying], np.ones(len(points))])
    y = np.array([p.bytes for p in points], dtype=float)
    fitted, *_ = np.linalg.lstsq(X, y, rcond=None)
    coef = [float("nan")] * 2 + [float(fitted[-1])]
    for k, j in enumerate(varying):
        coef[j] = float(fitted[k])
    return tuple(coef), [float(r) for r in (X @ fitted - y) / y]


def bench(spec: QuerySpec | None, ladder, config: SessionConfig | None = None, runs: int = 1, make_db=chain_database) -> BenchReport:
    """Run ``spec`` once per ``(n, m)`` in ``ladder`` and fit bytes against size.

    Bytes and rounds are deterministic for a given shape; wall time is the
    mean over ``runs`` repetitions.
    """
    spec = spec or chain_query()
    ladder = sorted({(int(n), int(m)) for n, m in ladder})
    report = BenchReport()
    for n, m in ladder:
        db = make_db(n, m)
        walls, res = [], None
        for _ in range(max(1, runs)):
            t0 = time.perf_counter()
            res = run_query(spec, db, config)
            walls.append(time.perf_counter() - t0)
        report.points.append(SizePoint(n, res.m, res.report.max_bytes, res.report.rounds, sum(walls) / len(walls)))
    distinct = {(p.n, p.m) for p in report.points}
    if len(distinct) >= 3:
        report.coef, report.residuals = fit_affine(report.points)
    return report
