"""Unit tests for persisting audits in DuckDB."""
import os
import tempfile

import numpy as np
import pytest

from src.core.scores import ScoreSet, Split
from src.database.connection import DuckDBConnection
from src.database.schema import create_schema
from src.database.store import AuditStore
from src.estimator import AuditMethod
from src.game.runner import report_from_scores


@pytest.fixture
def db_connection():
    """Temporary audit store with its schema created."""
    with tempfile.TemporaryDirectory() as tmpdir:
        conn = DuckDBConnection(os.path.join(tmpdir, "audits.duckdb"))
        create_schema(conn.connection)
        yield conn.connection
        conn.close()


@pytest.fixture
def report():
    rng = np.random.default_rng(0)
    n = 200
    labels = np.arange(n) % 2
    scores = labels + rng.normal(0, 0.8, n)
    splits = [Split.THRESHOLD.value] * (n // 2) + [Split.TEST.value] * (n // 2)
    run_seeds = np.arange(n, dtype=np.uint64) + np.uint64(2 ** 63)
    score_set = ScoreSet.from_arrays(labels, scores, run_seeds=run_seeds, splits=splits)
    echo = {"mechanism": {"family": "privbayes", "epsilon": 1.0, "bug": None}, "attack": "dcr"}
    return report_from_scores(score_set, 1.0, 0.0, 0.95, AuditMethod.EPS_DELTA_REGION, 2, echo)


class TestAuditStore:
    """Test recording and reading back audits."""

    def test_record_returns_id(self, db_connection, report):
        """Test that a stored audit gets an id."""
        store = AuditStore(db_connection)
        first = store.record_audit(report)
        second = store.record_audit(report)
        assert first is not None
        assert second == first + 1

    def test_scores_round_trip(self, db_connection, report):
        """Test that stored scores come back unchanged, seeds included."""
        store = AuditStore(db_connection, batch_size=16)
        audit_id = store.record_audit(report)
        loaded = store.load_scores(audit_id)
        np.testing.assert_array_equal(loaded.labels, report.scores.labels)
        np.testing.assert_array_equal(loaded.scores, report.scores.scores)
        np.testing.assert_array_equal(loaded.run_seeds, report.scores.run_seeds)
        assert loaded.splits.tolist() == report.scores.splits.tolist()

    def test_fold_scores_round_trip(self, db_connection):
        """Test that per-fold classifier scores come back with their gaps."""
        fold_scores = np.array([[np.nan, 0.2], [0.4, np.nan], [0.6, 0.1], [0.9, 0.8]])
        scores = ScoreSet.from_arrays([0, 1, 0, 1], [0.1, 0.7, 0.3, 0.9], fold_scores=fold_scores,
                                      splits=["threshold", "threshold", "test", "test"])
        report = report_from_scores(scores.with_scores(scores.scores), 1.0, 0.0, 0.95,
                                    AuditMethod.EPS_DELTA_REGION, 1, {"attack": "querybased"})
        store = AuditStore(db_connection)
        audit_id = store.record_audit(report, scores)
        loaded = store.load_scores(audit_id)
        np.testing.assert_array_equal(loaded.fold_scores, fold_scores)

    def test_fold_rows(self, db_connection, report):
        """Test that one row is stored per fold."""
        audit_id = AuditStore(db_connection).record_audit(report)
        count = db_connection.execute(
            "SELECT COUNT(*) FROM fold_estimates WHERE audit_id = ?", [audit_id]).fetchone()[0]
        assert count == len(report.fold_estimates)

    def test_config_and_listing(self, db_connection, report):
        """Test the echoed config and the audit listing."""
        store = AuditStore(db_connection)
        audit_id = store.record_audit(report)
        assert store.load_config(audit_id) == report.config
        listing = store.list_audits()
        assert listing["id"].tolist() == [audit_id]
        assert listing["mechanism"].iloc[0] == "privbayes"
        assert listing["verdict"].iloc[0] == report.verdict.value

    def test_unknown_audit(self, db_connection):
        """Test that unknown ids read back as None."""
        store = AuditStore(db_connection)
        assert store.load_scores(42) is None
        assert store.load_config(42) is None

    def test_missing_tables(self, report):
        """Test that a store without schema fails softly after retries."""
        with tempfile.TemporaryDirectory() as tmpdir:
            with DuckDBConnection(os.path.join(tmpdir, "empty.duckdb")) as conn:
                store = AuditStore(conn.connection, max_retries=1, retry_delay=0.0)
                assert store.record_audit(report) is None
                assert store.list_audits().empty


class TestListAuditsScript:
    """Test scripts/list_audits.py against real store files."""

    def _run(self, monkeypatch, *argv):
        from scripts import list_audits
        monkeypatch.setattr("sys.argv", ["list_audits.py", *argv])
        return list_audits.main()

    def test_missing_store(self, monkeypatch, tmp_path):
        """Test that a missing file is an error and is not created."""
        path = tmp_path / "none.duckdb"
        assert self._run(monkeypatch, "--db-path", str(path)) == 1
        assert not path.exists()

    def test_store_without_schema(self, monkeypatch, tmp_path):
        """Test that a store with no audit tables is rejected."""
        path = tmp_path / "bare.duckdb"
        DuckDBConnection(path).close()
        assert self._run(monkeypatch, "--db-path", str(path)) == 1

    def test_lists_and_summarizes(self, monkeypatch, tmp_path, report, capsys):
        """Test the listing and the score summary of a stored audit."""
        path = tmp_path / "audits.duckdb"
        with DuckDBConnection(path) as db:
            create_schema(db.connection)
            audit_id = AuditStore(db.connection).record_audit(report)
        assert self._run(monkeypatch, "--db-path", str(path), "--show-scores", str(audit_id)) == 0
        out = capsys.readouterr().out
        assert "STORED AUDITS" in out
        assert f"Audit {audit_id}: 200 runs" in out

    def test_unknown_audit_scores(self, monkeypatch, tmp_path):
        """Test that summarizing an unknown audit fails."""
        path = tmp_path / "audits.duckdb"
        with DuckDBConnection(path) as db:
            create_schema(db.connection)
        assert self._run(monkeypatch, "--db-path", str(path), "--show-scores", "7") == 1
