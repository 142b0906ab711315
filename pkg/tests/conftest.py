"""Shared fixtures for the auditor tests."""
import sys
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core.dataset import Dataset
from src.core.schema import Record, Schema


@pytest.fixture
def small_schema():
    """Three attributes with domain sizes (2, 2, 3)."""
    return Schema.from_columns([
        ("a", ["a0", "a1"]),
        ("b", ["b0", "b1"]),
        ("c", ["c0", "c1", "c2"]),
    ])


@pytest.fixture
def small_dataset(small_schema):
    """Twelve rows dominated by the all-zeros record."""
    codes = [(0, 0, 0)] * 6 + [(1, 0, 1)] * 3 + [(0, 1, 1)] * 2 + [(1, 1, 2)]
    return Dataset.from_records(small_schema, [Record(c) for c in codes])


@pytest.fixture
def target(small_schema):
    """The rarest record of small_dataset."""
    return Record((1, 1, 2))
