"""Tables of the audit store.

One row per audit, one row per game run and one row per cross-validation
fold. `schema_version` records which layout a store file was created with.
"""

import logging
from typing import Dict, Optional

import duckdb

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

TABLES: Dict[str, str] = {
    "audits": """
        CREATE TABLE IF NOT EXISTS audits (
            id INTEGER PRIMARY KEY,
            mechanism TEXT NOT NULL,
            attack TEXT NOT NULL,
            bug TEXT,
            claimed_epsilon DOUBLE NOT NULL,
            delta DOUBLE NOT NULL,
            confidence DOUBLE NOT NULL,
            method TEXT NOT NULL,
            eps_emp DOUBLE NOT NULL,
            mu_emp DOUBLE,
            fold_mean DOUBLE NOT NULL,
            fold_std DOUBLE NOT NULL,
            max_auditable_eps DOUBLE NOT NULL,
            auc DOUBLE,
            verdict TEXT NOT NULL,
            config_json TEXT NOT NULL,
            elapsed_seconds DOUBLE,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    """,
    "scores": """
        CREATE TABLE IF NOT EXISTS scores (
            audit_id INTEGER NOT NULL,
            run_index INTEGER NOT NULL,
            b INTEGER NOT NULL,
            score DOUBLE NOT NULL,
            split TEXT NOT NULL,
            run_seed UBIGINT NOT NULL,
            PRIMARY KEY (audit_id, run_index)
        )
    """,
    # tau of +-inf is stored as +-1e308
    "fold_estimates": """
        CREATE TABLE IF NOT EXISTS fold_estimates (
            audit_id INTEGER NOT NULL,
            fold INTEGER NOT NULL,
            eps_emp DOUBLE NOT NULL,
            mu_emp DOUBLE,
            tau DOUBLE NOT NULL,
            PRIMARY KEY (audit_id, fold)
        )
    """,
    # per-fold meta-classifier scores; runs that trained a fold have no row
    "fold_scores": """
        CREATE TABLE IF NOT EXISTS fold_scores (
            audit_id INTEGER NOT NULL,
            fold INTEGER NOT NULL,
            run_index INTEGER NOT NULL,
            score DOUBLE NOT NULL,
            PRIMARY KEY (audit_id, fold, run_index)
        )
    """,
}

SUPPORT_DDL = (
    """
    CREATE TABLE IF NOT EXISTS schema_version (
        version INTEGER PRIMARY KEY,
        applied_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
    )
    """,
    "CREATE SEQUENCE IF NOT EXISTS audit_id_seq START 1",
)

INDEXES = (
    "CREATE INDEX IF NOT EXISTS idx_audits_mechanism ON audits(mechanism, attack)",
    "CREATE INDEX IF NOT EXISTS idx_scores_split ON scores(audit_id, split)",
)


def create_schema(connection: duckdb.DuckDBPyConnection) -> bool:
    """Create every table, the id sequence and the indexes.

    Safe to call on an existing store. Returns False, after logging, when
    DuckDB rejects a statement.
    """
    try:
        for ddl in (*SUPPORT_DDL, *TABLES.values(), *INDEXES):
            connection.execute(ddl)
        connection.execute(
            "INSERT INTO schema_version (version) VALUES (?) "
            "ON CONFLICT (version) DO UPDATE SET applied_at = get_current_timestamp()",
            [SCHEMA_VERSION],
        )
        connection.commit()
    except duckdb.Error as e:
        logger.error(f"Could not create the audit store schema: {e}")
        return False
    logger.info(f"Audit store schema ready (version {SCHEMA_VERSION})")
    return True


def _existing_tables(connection: duckdb.DuckDBPyConnection) -> set:
    rows = connection.execute(
        "SELECT table_name FROM information_schema.tables WHERE table_schema = 'main'"
    ).fetchall()
    return {name for (name,) in rows}


def get_schema_version(connection: duckdb.DuckDBPyConnection) -> Optional[int]:
    """Newest applied version, or None for a store without one."""
    if "schema_version" not in _existing_tables(connection):
        return None
    (version,) = connection.execute("SELECT MAX(version) FROM schema_version").fetchone()
    return version


def validate_schema(connection: duckdb.DuckDBPyConnection) -> bool:
    """True if all audit tables exist at SCHEMA_VERSION."""
    try:
        missing = sorted(set(TABLES) - _existing_tables(connection))
        if missing:
            logger.warning(f"Audit store is missing tables: {', '.join(missing)}")
            return False
        version = get_schema_version(connection)
    except duckdb.Error as e:
        logger.error(f"Audit store validation failed: {e}")
        return False
    if version != SCHEMA_VERSION:
        logger.warning(f"Audit store has schema version {version}, expected {SCHEMA_VERSION}")
        return False
    return True
