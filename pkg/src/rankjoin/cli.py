"""Command line entry point: ``rankjoin {run,oracle,plan,bench,reveal}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from rankjoin.engine import bench as benchmod
from rankjoin.engine.driver import decode_result, run_query, run_single_party
from rankjoin.engine.expr import QueryError
from rankjoin.engine.oracle import plaintext_oracle
from rankjoin.engine.shares import ShareFileError, reconstruct_files, save_shares
from rankjoin.engine.sql import parse_query
from rankjoin.engine.tables import LoadError, load_database, load_schema
from rankjoin.planner import PlanError, build_join_trees, choose_plan, compile_plan, is_free_connex
from rankjoin.runtime import SessionAborted, SessionConfig, meter_report


def _number(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        d = Decimal(v.numerator) / Decimal(v.denominator)
        return str(d.quantize(Decimal("0.000001")).normalize())
    return str(v)


def render_rows(spec, rows, lexicon=None) -> list:
    types = spec.extra["types"]
    out = []
    for row in rows:
        cells = []
        for it, v in zip(spec.extra["items"], row):
            cells.append(types[it.attr].render(v, lexicon) if it.kind == "attr" else _number(v))
        out.append(cells)
    return out


def _print_table(spec, rows, lexicon=None, fh=None):
    fh = fh or sys.stdout
    fh.write("\t".join(it.label for it in spec.extra["items"]) + "\n")
    for cells in render_rows(spec, rows, lexicon):
        fh.write("\t".join(cells) + "\n")


def _config(args) -> SessionConfig:
    cfg = SessionConfig.load(args.config) if args.config else SessionConfig()
    if args.backend:
        cfg.backend = args.backend
    if args.prefix_layout:
        cfg.prefix_layout = args.prefix_layout
    if args.seed is not None:
        cfg.prg_seed = args.seed
        cfg.hash_seed = args.seed
    SessionConfig.__post_init__(cfg)
    return cfg


def _query(args, schemas):
    return parse_query(Path(args.query).read_text(), schemas)


def _write_stats(path, report, extra: dict):
    doc = {
        "max_bytes_per_party": report.max_bytes,
        "rounds": report.rounds,
        "wall_seconds": round(report.wall, 6),
        "parties": [
            {"party": t.party + 1, "sent": t.sent, "received": t.received, "rounds": t.rounds, "phases": t.phases}
            for t in report.per_party
        ],
        **extra,
    }
    Path(path).write_text(json.dumps(doc, indent=2, default=str) + "\n")


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.party:
        db = load_database(args.data, owners=cfg.owners, party=args.party)
        spec = _query(args, db.schemas)
        out, transcript = run_single_party(args.party, spec, db, cfg, reconstruct=args.reconstruct, tree=args.tree)
        if args.reconstruct:
            _print_table(spec, out.rows, db.lexicon())
        else:
            target = Path(args.out or ".") / f"party{args.party}.shares"
            save_shares(target, args.party - 1, out.shares, tag=out.plan.digest().hex())
            print(f"wrote {target}")
        if args.stats:
            _write_stats(args.stats, meter_report([transcript]), {"m": out.m, "plan": out.plan.tree.encoding()})
        return 0
    db = load_database(args.data, owners=cfg.owners)
    spec = _query(args, db.schemas)
    res = run_query(spec, db, cfg, tree=args.tree)
    _print_table(spec, res.rows, db.lexicon())
    if args.stats:
        _write_stats(args.stats, res.report, {"m": res.m, "plan": res.plan.tree.encoding(), "cost": str(res.plan.cost)})
    return 0


def cmd_oracle(args) -> int:
    db = load_database(args.data)
    spec = _query(args, db.schemas)
    _print_table(spec, plaintext_oracle(spec, db), db.lexicon())
    return 0


def cmd_plan(args) -> int:
    db = load_database(args.data) if args.data else None
    schemas = db.schemas if db else load_schema(args.schema)
    spec = _query(args, schemas)
    sizes = {r.name: (db.tables[spec.extra["tables"][r.name]].n if db else 0) for r in spec.relations}
    for t in build_join_trees(spec):
        ok = is_free_connex(t, spec.output)
        cost = compile_plan(t, spec).cost if ok else "-"
        print(f"{t.encoding():40} free-connex={ok!s:5} cost={cost}")
    plan = choose_plan(spec, sizes, tree=args.tree)
    print(plan.describe())
    if args.json:
        Path(args.json).write_text(plan.to_json() + "\n")
    return 0


def _ladder(items) -> list:
    out = []
    for it in items:
        n, _, m = it.partition(",")
        out.append((int(n), int(m or 0)))
    return out


def cmd_bench(args) -> int:
    cfg = _config(args)
    spec = None
    if args.query:
        spec = parse_query(Path(args.query).read_text(), benchmod.chain_schemas())
    report = benchmod.bench(spec, _ladder(args.ladder), cfg, runs=args.runs)
    sys.stdout.write(report.as_text())
    if args.stats:
        coef = None if report.coef is None else [None if math.isnan(c) else c for c in report.coef]
        doc = {"points": [dataclasses.asdict(p) for p in report.points], "coef": coef, "residuals": report.residuals}
        Path(args.stats).write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_reveal(args) -> int:
    db = load_database(args.data, party=args.party) if args.party else None
    schemas = db.schemas if db else load_schema(Path(args.data) / "schema.json")
    spec = _query(args, schemas)
    opened = reconstruct_files(args.shares[0], args.shares[1])
    _print_table(spec, decode_result(spec, opened), db.lexicon() if db else None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rankjoin", description="Three-party secure select-join-aggregate queries.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--query", required=True, help="file holding one SQL query")
        if data:
            sp.add_argument("--data", required=True, help="directory with schema.json and CSV files")

    def session(sp):
        sp.add_argument("--config", help="session config JSON")
        sp.add_argument("--backend", choices=("mpc", "dealer"))
        sp.add_argument("--seed", type=int, help="PRG and hash seed")
        sp.add_argument("--prefix-layout", choices=("brent-kung", "ladner-fischer"),
                        help="prefix network: fewer combines or fewer rounds")
        sp.add_argument("--stats", help="write communication statistics as JSON here")

    run = sub.add_parser("run", help="execute a query securely")
    common(run)
    session(run)
    run.add_argument("--party", type=int, choices=(1, 2, 3), help="run only this party over TCP")
    run.add_argument("--reconstruct", action=argparse.BooleanOptionalAction, default=True,
                     help="open the result (default) or keep it secret-shared")
    run.add_argument("--out", help="directory for share files when not reconstructing")
    run.add_argument("--tree", help="force a join tree, e.g. 'R1(R2,R3)'")
    run.set_defaults(fn=cmd_run)

    orc = sub.add_parser("oracle", help="evaluate a query in the clear")
    common(orc)
    orc.set_defaults(fn=cmd_oracle)

    pl = sub.add_parser("plan", help="list join trees and show the chosen plan")
    pl.add_argument("--query", required=True)
    src = pl.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="data directory (sizes are taken from it)")
    src.add_argument("--schema", help="schema.json alone")
    pl.add_argument("--tree")
    pl.add_argument("--json", help="write the plan as JSON here")
    pl.set_defaults(fn=cmd_plan)

    be = sub.add_parser("bench", help="sweep the synthetic chain workload")
    session(be)
    be.add_argument("--query", help="query over R1(a,b), R2(b,c), R3(c,d); default is the full join")
    be.add_argument("--ladder", nargs="+", required=True, metavar="N,M")
    be.add_argument("--runs", type=int, default=1)
    be.set_defaults(fn=cmd_bench)

    rv = sub.add_parser("reveal", help="reconstruct a result from two parties' share files")
    common(rv)
    rv.add_argument("--party", type=int, choices=(1, 2, 3), help="also read this party's tables to name strings")
    rv.add_argument("shares", nargs=2)
    rv.set_defaults(fn=cmd_reveal)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (LoadError, QueryError, PlanError, ShareFileError, SessionAborted, ValueError, OSError) as exc:
        print(f"rankjoin: error: {exc}", file=sys.stderr)
        return 2
