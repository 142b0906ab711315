#!/usr/bin/env python3
"""Generate the small categorical dataset used by the example configs.

Rows are drawn from skewed marginals with a mild dependency between the
first two attributes. One record made of every attribute's last category
is planted exactly once, giving average-case audits a rare target.

Usage:
    python scripts/make_toy_dataset.py [--rows N] [--seed S] [--out-dir DIR]
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core.dataset import Dataset
from src.core.schema import Record, Schema

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

TOY_SCHEMA = Schema.from_columns([
    ("age", ["young", "adult", "senior"]),
    ("income", ["low", "mid", "high"]),
    ("region", ["north", "south", "east", "west"]),
    ("smoker", ["no", "yes"]),
    ("plan", ["basic", "plus", "premium"]),
])

# Marginal weights; the last category of each attribute is kept out of the bulk.
WEIGHTS = {
    "age": [0.45, 0.55, 0.0],
    "region": [0.4, 0.3, 0.3, 0.0],
    "smoker": [1.0, 0.0],
    "plan": [0.6, 0.4, 0.0],
}

INCOME_GIVEN_AGE = np.array([
    [0.7, 0.3, 0.0],
    [0.3, 0.7, 0.0],
    [0.5, 0.5, 0.0],
])


def make_toy_dataset(n_rows: int = 200, seed: int = 0) -> Dataset:
    """Deterministic toy dataset with one planted rare record.

    Args:
        n_rows: Total number of rows, including the planted one
        seed: Seed of the generator

    Returns:
        Dataset over TOY_SCHEMA
    """
    if n_rows < 2:
        raise ValueError("n_rows must be at least 2")
    rng = np.random.default_rng(seed)
    n_bulk = n_rows - 1
    codes = np.zeros((n_bulk, len(TOY_SCHEMA)), dtype=np.int64)
    for name, weights in WEIGHTS.items():
        codes[:, TOY_SCHEMA.index_of(name)] = rng.choice(len(weights), size=n_bulk, p=weights)
    age = codes[:, TOY_SCHEMA.index_of("age")]
    income = TOY_SCHEMA.index_of("income")
    for i in range(n_bulk):
        codes[i, income] = rng.choice(3, p=INCOME_GIVEN_AGE[age[i]])

    planted = Record(tuple(size - 1 for size in TOY_SCHEMA.sizes))
    rows = [Record(tuple(int(v) for v in row)) for row in codes]
    rows.insert(int(rng.integers(0, n_rows)), planted)
    return Dataset.from_records(TOY_SCHEMA, rows)


def main():
    parser = argparse.ArgumentParser(description="Generate the toy audit dataset")
    parser.add_argument("--rows", type=int, default=200, help="Number of rows (default: 200)")
    parser.add_argument("--seed", type=int, default=0, help="Generator seed (default: 0)")
    parser.add_argument("--out-dir", type=str, default="data", help="Output directory (default: data)")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset = make_toy_dataset(args.rows, args.seed)
    except ValueError as e:
        logger.error(str(e))
        sys.exit(1)

    TOY_SCHEMA.save_json(out_dir / "toy_schema.json")
    dataset.save_csv(out_dir / "toy.csv")
    logger.info(f"Wrote {len(dataset)} rows to {out_dir / 'toy.csv'} and the schema to {out_dir / 'toy_schema.json'}")


if __name__ == "__main__":
    main()
