"""Tests for the toy dataset generator script."""
from pathlib import Path

import pytest

from scripts.make_toy_dataset import TOY_SCHEMA, make_toy_dataset
from src.core.schema import Record, Schema
from src.worstcase import rank_vulnerable

SHIPPED_SCHEMA = Path(__file__).parent.parent / "data" / "toy_schema.json"


class TestToyDataset:
    """Test the generated toy data."""

    def test_planted_record_is_unique(self):
        """Test that the all-last-categories record appears exactly once."""
        d = make_toy_dataset(200, seed=0)
        planted = Record(tuple(size - 1 for size in TOY_SCHEMA.sizes))
        assert len(d) == 200
        assert d.count(planted) == 1

    def test_planted_record_is_rarest(self):
        """Test that the rarity ranking puts the planted record first."""
        d = make_toy_dataset(150, seed=4)
        top = d.rows[int(rank_vulnerable(d, 1)["row"].iloc[0])]
        assert top == Record(tuple(size - 1 for size in TOY_SCHEMA.sizes))

    def test_deterministic(self):
        """Test that the seed fixes the rows."""
        assert make_toy_dataset(50, seed=2).rows == make_toy_dataset(50, seed=2).rows

    def test_too_small(self):
        """Test that at least two rows are required."""
        with pytest.raises(ValueError):
            make_toy_dataset(1)

    def test_shipped_schema_matches(self):
        """Test that data/toy_schema.json is the generator's schema."""
        assert Schema.load_json(SHIPPED_SCHEMA) == TOY_SCHEMA
