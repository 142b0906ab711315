"""DuckDB connection to the audit store file."""

import logging
from pathlib import Path
from typing import Optional, Union

import duckdb

from src.config import Config

logger = logging.getLogger(__name__)


class DuckDBConnection:
    """One open audit store.

    Writers create the parent directory on demand. Readers open an existing
    file read-only, so listing audits never creates an empty store.
    """

    def __init__(self, db_path: Optional[Union[str, Path]] = None, read_only: bool = False):
        """Open the store.

        Args:
            db_path: Store file. Defaults to Config.AUDIT_DATABASE_PATH
            read_only: Open an existing file without write access

        Raises:
            FileNotFoundError: If read_only and the file does not exist
        """
        self._db_path = Path(db_path or Config.AUDIT_DATABASE_PATH)
        self._read_only = read_only

        if read_only:
            if not self._db_path.exists():
                raise FileNotFoundError(f"Audit store not found: {self._db_path}")
        else:
            self._db_path.parent.mkdir(parents=True, exist_ok=True)

        self._connection: Optional[duckdb.DuckDBPyConnection] = duckdb.connect(
            str(self._db_path), read_only=read_only)
        mode = "read-only" if read_only else "read-write"
        logger.info(f"Opened audit store {self._db_path} ({mode})")

    @property
    def connection(self) -> duckdb.DuckDBPyConnection:
        """Raises RuntimeError once closed."""
        if self._connection is None:
            raise RuntimeError(f"Audit store {self._db_path} is closed")
        return self._connection

    @property
    def db_path(self) -> Path:
        return self._db_path

    @property
    def read_only(self) -> bool:
        return self._read_only

    def health_check(self) -> bool:
        """True while the connection answers a trivial query."""
        if self._connection is None:
            return False
        try:
            return self._connection.execute("SELECT 1").fetchone() == (1,)
        except duckdb.Error as e:
            logger.error(f"Audit store {self._db_path} failed its health check: {e}")
            return False

    def close(self) -> None:
        if self._connection is None:
            return
        self._connection.close()
        self._connection = None
        logger.debug(f"Closed audit store {self._db_path}")

    def __enter__(self) -> "DuckDBConnection":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()
