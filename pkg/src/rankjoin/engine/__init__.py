"""Ingestion, query parsing, reference evaluation and three-party execution."""

from rankjoin.engine.driver import QueryResult, party_main, run_query, run_single_party
from rankjoin.engine.oracle import plaintext_oracle, same_multiset
from rankjoin.engine.sql import parse_query
from rankjoin.engine.tables import (
    ColumnType,
    Database,
    LoadError,
    PlainTable,
    TableSchema,
    ingest_csv,
    load_database,
)

__all__ = [
    "ColumnType",
    "Database",
    "LoadError",
    "PlainTable",
    "QueryResult",
    "TableSchema",
    "ingest_csv",
    "load_database",
    "parse_query",
    "party_main",
    "plaintext_oracle",
    "run_query",
    "run_single_party",
    "same_multiset",
]
