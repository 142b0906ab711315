"""Core domain types shared by every other module.

Schemas, records, datasets, neighboring pairs and score sets.
"""

from src.core.schema import (
    Attribute,
    Schema,
    Record,
    encode_one_hot,
    project_one_hot,
    infer_metadata,
)
from src.core.dataset import Dataset, NeighborPair, NeighborVariant, make_neighbors
from src.core.scores import ScoreSet, Split

__all__ = [
    "Attribute",
    "Schema",
    "Record",
    "encode_one_hot",
    "project_one_hot",
    "infer_metadata",
    "Dataset",
    "NeighborPair",
    "NeighborVariant",
    "make_neighbors",
    "ScoreSet",
    "Split",
]
