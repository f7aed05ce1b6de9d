"""Plain tables, column encodings and CSV ingestion.

Every cell is stored as one unsigned 64-bit word.  Dates become days since
1970-01-01, decimals become fixed-point integers at the column's scale and
strings become a 63-bit digest (equality only).
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

MAX_WORD = (1 << 64) - 1
_EPOCH = dt.date(1970, 1, 1)


class LoadError(ValueError):
    """A table or schema file could not be loaded."""


@dataclass(frozen=True)
class ColumnType:
    kind: str  # int | decimal | date | str
    scale: int = 1

    @classmethod
    def parse(cls, text: str) -> "ColumnType":
        text = text.strip().lower()
        m = re.fullmatch(r"decimal(?:\((\d+)\))?", text)
        if m:
            digits = int(m.group(1) or 2)
            return cls("decimal", 10 ** digits)
        if text in ("int", "date", "str"):
            return cls(text)
        raise LoadError(f"unknown column type {text!r}")

    def __str__(self):
        if self.kind == "decimal":
            return f"decimal({len(str(self.scale)) - 1})"
        return self.kind

    @property
    def ordered(self) -> bool:
        return self.kind != "str"

    def encode(self, cell) -> int:
        """Word for a CSV cell or a query literal."""
        if self.kind == "str":
            return string_code(str(cell))
        if self.kind == "date":
            if isinstance(cell, int):
                v = cell
            else:
                try:
                    v = (dt.date.fromisoformat(str(cell).strip()) - _EPOCH).days
                except ValueError as exc:
                    raise LoadError(f"bad date {cell!r}") from exc
        else:
            try:
                exact = Fraction(str(cell).strip()) * self.scale
            except (ValueError, ZeroDivisionError) as exc:
                raise LoadError(f"bad number {cell!r}") from exc
            if exact.denominator != 1:
                raise LoadError(f"{cell!r} has more precision than {self}")
            v = exact.numerator
        if not 0 <= v <= MAX_WORD:
            raise LoadError(f"value {cell!r} does not fit an unsigned 64-bit word")
        return v

    def value(self, word: int):
        """Exact number a word stands for (strings stay as their code)."""
        word = int(word)
        return Fraction(word, self.scale) if self.kind == "decimal" else word

    def render(self, word: int, lexicon=None) -> str:
        word = int(word)
        if self.kind == "str":
            return (lexicon or {}).get(word, f"#{word:016x}")
        if self.kind == "date":
            return (_EPOCH + dt.timedelta(days=word)).isoformat()
        if self.kind == "decimal":
            digits = len(str(self.scale)) - 1
            return f"{word // self.scale}.{word % self.scale:0{digits}d}"
        return str(word)


def string_code(s: str) -> int:
    return int.from_bytes(hashlib.sha256(s.encode()).digest()[:8], "little") >> 1


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple  # column names
    types: tuple  # ColumnType per column
    owner: int = 1  # 1..3
    file: str = ""

    def type_of(self, column: str) -> ColumnType:
        try:
            return self.types[self.columns.index(column)]
        except ValueError:
            raise LoadError(f"table {self.name} has no column {column!r}") from None


@dataclass
class PlainTable:
    """A rectangular table of words owned by one party."""

    schema: TableSchema
    rows: np.ndarray  # (n, k) uint64
    annotation: list | None = field(default=None)
    strings: dict = field(default_factory=dict)  # code -> original text of str cells

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.uint64).reshape(-1, len(self.schema.columns))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def columns(self) -> tuple:
        return self.schema.columns

    @property
    def owner(self) -> int:
        return self.schema.owner

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.schema.columns.index(name)]

    @classmethod
    def from_rows(cls, schema: TableSchema, rows) -> "PlainTable":
        rows = [tuple(r) for r in rows]
        for r in rows:
            if len(r) != len(schema.columns):
                raise LoadError(f"row {r} of {schema.name} has {len(r)} cells, expected {len(schema.columns)}")
            for v in r:
                if not 0 <= int(v) <= MAX_WORD:
                    raise LoadError(f"value {v} in {schema.name} does not fit an unsigned 64-bit word")
        arr = np.array([[int(v) for v in r] for r in rows], dtype=np.uint64)
        return cls(schema, arr.reshape(len(rows), len(schema.columns)))


def ingest_csv(path, schema: TableSchema, annotation: str | None = None) -> PlainTable:
    """Load a CSV whose header names exactly the schema's columns.

    With ``annotation`` (an arithmetic expression over the columns) the
    table also gets a per-row annotation value, evaluated exactly; it must
    come out as a non-negative integer.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        if tuple(header) != tuple(schema.columns):
            unknown = [h for h in header if h not in schema.columns]
            if unknown:
                raise LoadError(f"{path}: unknown column(s) {unknown}")
            raise LoadError(f"{path}: header {header} does not match schema {list(schema.columns)}")
        rows, strings = [], {}
        texts = [i for i, t in enumerate(schema.types) if t.kind == "str"]
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise LoadError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            try:
                rows.append([t.encode(c) for t, c in zip(schema.types, rec)])
            except LoadError as exc:
                raise LoadError(f"{path}:{lineno}: {exc}") from None
            for i in texts:
                strings[rows[-1][i]] = rec[i]
    table = PlainTable(schema, np.array(rows, dtype=np.uint64).reshape(len(rows), len(header)), strings=strings)
    if annotation is not None:
        from rankjoin.engine.expr import parse_expression

        expr = parse_expression(annotation)
        vals = []
        for r in table.rows:
            env = {c: t.value(w) for c, t, w in zip(schema.columns, schema.types, r)}
            v = expr.evaluate(lambda col: env[col])
            if v.denominator != 1 or v < 0:
                raise LoadError(f"annotation {annotation!r} gives {v}, not a non-negative integer")
            vals.append(int(v))
        table.annotation = vals
    return table


def write_csv(path, table: PlainTable, raw: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([int(v) if raw else t.render(v) for t, v in zip(table.schema.types, r)])


@dataclass
class Database:
    """Schemas of every table plus the rows each party can see."""

    schemas: dict
    tables: dict = field(default_factory=dict)

    def owned_by(self, party: int) -> "Database":
        """Only the tables ``party`` (1..3) owns."""
        return Database(self.schemas, {k: v for k, v in self.tables.items() if self.schemas[k].owner == party})

    def sizes(self) -> dict:
        return {k: v.n for k, v in self.tables.items()}

    def lexicon(self) -> dict:
        """String codes seen in the loaded tables, for rendering results."""
        out = {}
        for t in self.tables.values():
            out.update(t.strings)
        return out


def load_schema(path) -> dict:
    """``{"tables": {name: {"owner": p, "file": f, "columns": {col: type}}}}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read schema {path}: {exc}") from None
    out = {}
    for name, spec in doc.get("tables", {}).items():
        cols = spec.get("columns")
        if not isinstance(cols, dict) or not cols:
            raise LoadError(f"table {name} needs a non-empty column map")
        owner = int(spec.get("owner", 1))
        if owner not in (1, 2, 3):
            raise LoadError(f"table {name} has owner {owner}; owners are 1, 2 or 3")
        out[name] = TableSchema(
            name,
            tuple(cols),
            tuple(ColumnType.parse(t) for t in cols.values()),
            owner,
            spec.get("file", f"{name}.csv"),
        )
    return out


def save_schema(path, schemas: dict) -> None:
    doc = {
        "tables": {
            s.name: {"owner": s.owner, "file": s.file or f"{s.name}.csv", "columns": {c: str(t) for c, t in zip(s.columns, s.types)}}
            for s in schemas.values()
        }
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_database(directory, owners: dict | None = None, party: int | None = None) -> Database:
    """Read ``schema.json`` and the CSVs in ``directory``.

    ``owners`` (table -> party) overrides the schema file.  With ``party``
    set, only that party's own tables are read.
    """
    directory = Path(directory)
    schemas = load_schema(directory / "schema.json")
    for name, owner in (owners or {}).items():
        if name in schemas:
            s = schemas[name]
            schemas[name] = TableSchema(s.name, s.columns, s.types, int(owner), s.file)
    db = Database(schemas)
    for name, s in schemas.items():
        if party is not None and s.owner != party:
            continue
        db.tables[name] = ingest_csv(directory / s.file, s)
    return db
