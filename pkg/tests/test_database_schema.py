"""Unit tests for the audit store schema."""
import pytest

from src.database.connection import DuckDBConnection
from src.database.schema import SCHEMA_VERSION, TABLES, create_schema, get_schema_version, validate_schema


class TestAuditStoreSchema:
    """Creating and validating the audit tables."""

    @pytest.fixture
    def connection(self, tmp_path):
        with DuckDBConnection(tmp_path / "audits.duckdb") as store:
            yield store.connection

    def test_fresh_store_has_no_version(self, connection):
        """Test an empty file."""
        assert get_schema_version(connection) is None
        assert validate_schema(connection) is False

    def test_create_sets_version(self, connection):
        """Test that creation records the current version."""
        assert create_schema(connection) is True
        assert get_schema_version(connection) == SCHEMA_VERSION
        assert validate_schema(connection) is True

    def test_audit_tables_start_empty(self, connection):
        """Test that audits, scores and the fold tables exist and are empty."""
        create_schema(connection)
        assert set(TABLES) == {"audits", "scores", "fold_estimates", "fold_scores"}
        for table in TABLES:
            assert connection.execute(f"SELECT COUNT(*) FROM {table}").fetchone()[0] == 0

    def test_create_twice(self, connection):
        """Test that re-creating keeps a single version row."""
        assert create_schema(connection) is True
        assert create_schema(connection) is True
        assert connection.execute("SELECT COUNT(*) FROM schema_version").fetchone()[0] == 1

    def test_dropped_table_fails_validation(self, connection):
        """Test that a store missing a table is rejected."""
        create_schema(connection)
        connection.execute("DROP TABLE fold_estimates")
        assert validate_schema(connection) is False

    def test_other_version_fails_validation(self, connection):
        """Test that a store from another layout version is rejected."""
        create_schema(connection)
        connection.execute("INSERT INTO schema_version (version) VALUES (?)", [SCHEMA_VERSION + 1])
        assert get_schema_version(connection) == SCHEMA_VERSION + 1
        assert validate_schema(connection) is False

    def test_audit_ids_increase(self, connection):
        """Test the audit id sequence."""
        create_schema(connection)
        first = connection.execute("SELECT nextval('audit_id_seq')").fetchone()[0]
        second = connection.execute("SELECT nextval('audit_id_seq')").fetchone()[0]
        assert second == first + 1
