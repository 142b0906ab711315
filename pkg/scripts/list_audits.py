#!/usr/bin/env python3
"""List the audits recorded in the DuckDB audit store.

With --show-scores, also summarizes the score distribution of one audit
per split and world bit.

Usage:
    python scripts/list_audits.py [--db-path PATH] [--show-scores ID] [--verbose]
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import Config
from src.database.connection import DuckDBConnection
from src.database.schema import SCHEMA_VERSION, get_schema_version, validate_schema
from src.database.store import AuditStore

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def print_audits(audits: pd.DataFrame) -> None:
    print("\n" + "=" * 60)
    print("STORED AUDITS")
    print("=" * 60)
    if audits.empty:
        print("No audits recorded yet")
    else:
        with pd.option_context("display.max_columns", None, "display.width", 160):
            print(audits.to_string(index=False))
    print("=" * 60 + "\n")


def print_scores(store: AuditStore, audit_id: int) -> bool:
    scores = store.load_scores(audit_id)
    if scores is None:
        logger.error(f"Audit {audit_id} has no stored scores")
        return False
    frame = scores.to_frame()
    print(f"\nAudit {audit_id}: {len(frame)} runs")
    print(frame.groupby(["split", "b"])["score"].describe().to_string())
    return True


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description='List audits stored in the DuckDB audit store'
    )
    parser.add_argument(
        '--db-path',
        type=Path,
        default=Path(Config.AUDIT_DATABASE_PATH),
        help='Path to DuckDB database file'
    )
    parser.add_argument(
        '--show-scores',
        type=int,
        default=None,
        metavar='ID',
        help='Summarize the score distribution of one audit'
    )
    parser.add_argument(
        '--verbose',
        action='store_true',
        help='Enable verbose logging'
    )

    args = parser.parse_args()

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        with DuckDBConnection(args.db_path, read_only=True) as db:
            if not validate_schema(db.connection):
                logger.error(
                    f"Audit store schema invalid (expected version {SCHEMA_VERSION}, "
                    f"found {get_schema_version(db.connection)})"
                )
                return 1
            store = AuditStore(db.connection)
            print_audits(store.list_audits())
            if args.show_scores is not None and not print_scores(store, args.show_scores):
                return 1
            return 0
    except FileNotFoundError as e:
        logger.error(str(e))
        return 1
    except Exception as e:
        logger.error(f"Listing audits failed: {e}", exc_info=True)
        return 1


if __name__ == '__main__':
    sys.exit(main())
