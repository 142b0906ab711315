"""Audit store backed by DuckDB.

Persists audit reports, their score sets and fold estimates so that
estimation can be repeated without fitting models again.
"""

from src.database.connection import DuckDBConnection
from src.database.schema import create_schema, get_schema_version, validate_schema
from src.database.store import AuditStore

__all__ = [
    "DuckDBConnection",
    "create_schema",
    "get_schema_version",
    "validate_schema",
    "AuditStore",
]
