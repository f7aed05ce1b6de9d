"""Average net treatment cost per disease, computed by three data owners.

Each of three data owners holds one table and never sees the others' rows.
The only thing opened at the end is the grouped result.
Run from the repository root:  python3 demos/clinic.py
"""

from pathlib import Path

from rankjoin.cli import render_rows
from rankjoin.engine import load_database, parse_query, plaintext_oracle, run_query
from rankjoin.runtime import SessionConfig

DATA = Path(__file__).parent / "data" / "clinic"


def main():
    db = load_database(DATA)
    spec = parse_query((DATA / "avg_cost.sql").read_text(), db.schemas)
    for name, table in db.tables.items():
        print(f"{name}: {table.n} rows, held by party {table.schema.owner}")

    result = run_query(spec, db, SessionConfig(backend="mpc"))
    print("\nplan chosen from public table sizes:")
    print(result.plan.describe())

    print("\nsecure result:")
    for row in render_rows(spec, result.rows, db.lexicon()):
        print("  " + "  ".join(row))
    assert result.rows == plaintext_oracle(spec, db), "secure result differs from the reference"
    print("(matches the plaintext reference)")

    r = result.report
    print(f"\n{r.rounds} rounds, at most {r.max_bytes} bytes sent and received by any one party")
    for t in r.per_party:
        print(f"  party {t.party + 1}: " + ", ".join(f"{k} {v}B" for k, v in t.phases.items()))


if __name__ == "__main__":
    main()
