"""Unit tests for the audit store connection."""
from pathlib import Path
from unittest.mock import patch

import pytest

from src.config import Config
from src.database.connection import DuckDBConnection
from src.database.schema import create_schema, validate_schema


class TestDuckDBConnection:
    """Opening, checking and closing store files."""

    def test_open_store(self, tmp_path):
        """Test that a new store file is opened read-write."""
        path = tmp_path / "audits.duckdb"
        store = DuckDBConnection(path)
        assert store.db_path == path
        assert store.read_only is False
        assert store.connection.execute("SELECT 42").fetchone() == (42,)
        store.close()

    def test_one_connection_per_file(self, tmp_path):
        """Test that two files give two independent connections."""
        with DuckDBConnection(tmp_path / "a.duckdb") as a, DuckDBConnection(tmp_path / "b.duckdb") as b:
            a.connection.execute("CREATE TABLE only_in_a (x INTEGER)")
            tables = b.connection.execute(
                "SELECT COUNT(*) FROM information_schema.tables WHERE table_name = 'only_in_a'"
            ).fetchone()[0]
            assert tables == 0

    def test_health_check_follows_lifecycle(self, tmp_path):
        """Test that the health check fails once the store is closed."""
        store = DuckDBConnection(tmp_path / "audits.duckdb")
        assert store.health_check() is True
        store.close()
        assert store.health_check() is False
        store.close()

    def test_closed_store_refuses_queries(self, tmp_path):
        """Test that a closed store raises on access."""
        with DuckDBConnection(tmp_path / "audits.duckdb") as store:
            pass
        with pytest.raises(RuntimeError, match="closed"):
            _ = store.connection

    def test_creates_parent_directory(self, tmp_path):
        """Test that writers create missing directories."""
        path = tmp_path / "nested" / "dir" / "audits.duckdb"
        with DuckDBConnection(path):
            assert path.parent.is_dir()

    def test_read_only_needs_existing_file(self, tmp_path):
        """Test that readers never create a store."""
        path = tmp_path / "missing" / "audits.duckdb"
        with pytest.raises(FileNotFoundError):
            DuckDBConnection(path, read_only=True)
        assert not path.parent.exists()

    def test_read_only_sees_written_schema(self, tmp_path):
        """Test reopening a populated store read-only."""
        path = tmp_path / "audits.duckdb"
        with DuckDBConnection(path) as writer:
            create_schema(writer.connection)
        with DuckDBConnection(path, read_only=True) as reader:
            assert reader.read_only is True
            assert validate_schema(reader.connection) is True

    def test_default_path_from_config(self, tmp_path):
        """Test that the configured store path is used by default."""
        path = tmp_path / "default.duckdb"
        with patch.object(Config, "AUDIT_DATABASE_PATH", str(path)):
            with DuckDBConnection() as store:
                assert store.db_path == Path(path)
