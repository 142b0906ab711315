"""Audit store: persist reports and score sets so estimates can be re-run.

Storage helpers log failures and return None/False instead of raising, so
a broken store never aborts an audit.
"""

import json
import logging
import math
import time
from typing import Any, List, Optional, Tuple

import pandas as pd

from src.core.scores import FOLD_COLUMN_PREFIX, ScoreSet

logger = logging.getLogger(__name__)


class AuditStore:
    """Writes audits, their scores and fold estimates to DuckDB.

    Attributes:
        connection: DuckDB connection instance
        batch_size: Score rows inserted per statement batch
        max_retries: Maximum number of retry attempts for a failed write
        retry_delay: Delay in seconds between retries
    """

    def __init__(self, connection, batch_size: int = 1000, max_retries: int = 3, retry_delay: float = 1.0):
        self.connection = connection
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.retry_delay = retry_delay

    def _audit_row(self, report) -> Tuple[Any, ...]:
        estimate = report.estimate
        config = report.config
        mechanism = config.get("mechanism", {})
        bug = mechanism.get("bug") or {}
        return (
            mechanism.get("family", "unknown"),
            config.get("attack", "unknown"),
            bug.get("kind"),
            report.claimed_epsilon,
            estimate.delta,
            estimate.confidence,
            estimate.method.value,
            report.eps_emp,
            estimate.mu_emp,
            report.fold_mean,
            report.fold_std,
            estimate.max_auditable_eps,
            report.auc,
            report.verdict.value,
            json.dumps(config, sort_keys=True),
            report.elapsed_seconds,
        )

    def _write(self, report, scores: ScoreSet) -> int:
        self.connection.begin()
        audit_id = self.connection.execute("SELECT nextval('audit_id_seq')").fetchone()[0]
        self.connection.execute(
            """
            INSERT INTO audits (
                id, mechanism, attack, bug, claimed_epsilon, delta, confidence, method,
                eps_emp, mu_emp, fold_mean, fold_std, max_auditable_eps, auc, verdict,
                config_json, elapsed_seconds
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """,
            (audit_id,) + self._audit_row(report),
        )

        rows: List[Tuple[Any, ...]] = [
            (audit_id, int(i), int(b), float(s), str(split), int(seed))
            for i, b, s, split, seed in zip(
                scores.run_index, scores.labels, scores.scores, scores.splits, scores.run_seeds)
        ]
        for start in range(0, len(rows), self.batch_size):
            self.connection.executemany(
                "INSERT INTO scores (audit_id, run_index, b, score, split, run_seed) VALUES (?, ?, ?, ?, ?, ?)",
                rows[start:start + self.batch_size],
            )

        if scores.fold_scores is not None:
            fold_score_rows = [
                (audit_id, fold, int(i), float(s))
                for fold in range(scores.fold_scores.shape[1])
                for i, s in zip(scores.run_index, scores.fold_scores[:, fold])
                if not math.isnan(s)
            ]
            for start in range(0, len(fold_score_rows), self.batch_size):
                self.connection.executemany(
                    "INSERT INTO fold_scores (audit_id, fold, run_index, score) VALUES (?, ?, ?, ?)",
                    fold_score_rows[start:start + self.batch_size],
                )

        fold_rows = [
            (audit_id, fold, e.eps_emp, e.mu_emp, e.tau if math.isfinite(e.tau) else math.copysign(1e308, e.tau))
            for fold, e in enumerate(report.fold_estimates)
        ]
        if fold_rows:
            self.connection.executemany(
                "INSERT INTO fold_estimates (audit_id, fold, eps_emp, mu_emp, tau) VALUES (?, ?, ?, ?, ?)",
                fold_rows,
            )
        self.connection.commit()
        return int(audit_id)

    def record_audit(self, report, scores: Optional[ScoreSet] = None) -> Optional[int]:
        """Persist an audit report with its scores.

        Args:
            report: AuditReport to store
            scores: Score set; defaults to the one carried by the report

        Returns:
            The new audit id, or None if every attempt failed
        """
        scores = scores if scores is not None else report.scores
        if scores is None:
            logger.error("Audit report carries no scores to store")
            return None

        for attempt in range(self.max_retries + 1):
            try:
                audit_id = self._write(report, scores)
                logger.info(f"Stored audit {audit_id} with {len(scores)} scores")
                return audit_id
            except Exception as e:
                logger.error(f"Failed to store audit (attempt {attempt + 1}/{self.max_retries + 1}): {e}")
                try:
                    self.connection.rollback()
                except Exception:
                    pass  # no open transaction
                if attempt < self.max_retries:
                    time.sleep(self.retry_delay * (attempt + 1))
        return None

    def load_scores(self, audit_id: int) -> Optional[ScoreSet]:
        """Score set of a stored audit, or None if it is unknown."""
        try:
            frame = self.connection.execute(
                "SELECT run_index, b, score, split, run_seed FROM scores WHERE audit_id = ? ORDER BY run_index",
                [audit_id],
            ).df()
        except Exception as e:
            logger.error(f"Failed to load scores of audit {audit_id}: {e}")
            return None
        if frame.empty:
            logger.warning(f"No scores stored for audit {audit_id}")
            return None
        try:
            folds = self.connection.execute(
                "SELECT fold, run_index, score FROM fold_scores WHERE audit_id = ?", [audit_id]).df()
        except Exception as e:
            logger.error(f"Failed to load fold scores of audit {audit_id}: {e}")
            return None
        if not folds.empty:
            wide = folds.pivot(index="run_index", columns="fold", values="score")
            wide.columns = [f"{FOLD_COLUMN_PREFIX}{fold}" for fold in wide.columns]
            frame = frame.join(wide, on="run_index")
        return ScoreSet.from_frame(frame)

    def load_config(self, audit_id: int) -> Optional[dict]:
        """Echoed config of a stored audit."""
        try:
            row = self.connection.execute(
                "SELECT config_json FROM audits WHERE id = ?", [audit_id]).fetchone()
        except Exception as e:
            logger.error(f"Failed to load audit {audit_id}: {e}")
            return None
        return json.loads(row[0]) if row else None

    def list_audits(self) -> pd.DataFrame:
        """One row per stored audit, newest first."""
        try:
            return self.connection.execute(
                """
                SELECT id, mechanism, attack, bug, claimed_epsilon, eps_emp, fold_std,
                       max_auditable_eps, auc, verdict, created_at
                FROM audits ORDER BY id DESC
                """
            ).df()
        except Exception as e:
            logger.error(f"Failed to list audits: {e}")
            return pd.DataFrame()
