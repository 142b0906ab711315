"""Datasets of categorical records and neighboring-dataset construction."""

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from src.core.schema import Record, Schema
from src.errors import DegeneratePairError, EncodingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Ordered multiset of records conforming to a schema.

    Attributes:
        schema: Schema every row is valid under
        rows: Records in insertion order (duplicates allowed)
    """
    schema: Schema
    rows: tuple

    def __post_init__(self):
        for row in self.rows:
            row.validate(self.schema)

    @classmethod
    def from_records(cls, schema: Schema, rows: Iterable[Record]) -> "Dataset":
        return cls(schema, tuple(rows))

    @classmethod
    def from_codes(cls, schema: Schema, codes: np.ndarray) -> "Dataset":
        """Build a dataset from an (n, d) integer matrix of category indices."""
        codes = np.asarray(codes, dtype=np.int64).reshape(-1, len(schema))
        return cls(schema, tuple(Record(tuple(int(v) for v in row)) for row in codes))

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def codes(self) -> np.ndarray:
        """Rows as an (n, d) integer matrix."""
        if not self.rows:
            return np.zeros((0, len(self.schema)), dtype=np.int64)
        return np.array([r.values for r in self.rows], dtype=np.int64)

    def one_hot(self) -> np.ndarray:
        """Rows one-hot encoded as an (n, one_hot_dim) matrix."""
        matrix = np.zeros((len(self), self.schema.one_hot_dim))
        if len(self):
            cols = self.codes + self.schema.offsets[None, :]
            matrix[np.arange(len(self))[:, None], cols] = 1.0
        return matrix

    def count(self, record: Record) -> int:
        """Multiplicity of a record."""
        return sum(1 for r in self.rows if r == record)

    def multiset(self) -> Counter:
        return Counter(self.rows)

    def with_rows(self, rows: Iterable[Record]) -> "Dataset":
        """Same schema object, different rows."""
        return Dataset(self.schema, tuple(rows))

    def add(self, record: Record) -> "Dataset":
        return self.with_rows(self.rows + (record,))

    def remove_one(self, record: Record) -> "Dataset":
        """Dataset with one copy of record removed.

        Raises:
            ValueError: If the record is not present
        """
        rows = list(self.rows)
        try:
            rows.remove(record)
        except ValueError:
            raise ValueError("Record is not in the dataset") from None
        return self.with_rows(rows)

    def to_frame(self) -> pd.DataFrame:
        """Rows as a table of category strings, one column per attribute."""
        data = {
            attr.name: [attr.categories[v] for v in self.codes[:, j]]
            for j, attr in enumerate(self.schema.attributes)
        }
        return pd.DataFrame(data, columns=self.schema.names)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, schema: Schema) -> "Dataset":
        """Encode a table of category strings under a schema.

        Raises:
            EncodingError: If a column is missing or holds an unknown category
        """
        missing = [n for n in schema.names if n not in frame.columns]
        if missing:
            raise EncodingError(f"Table is missing columns {missing}")
        codes = np.zeros((len(frame), len(schema)), dtype=np.int64)
        for j, attr in enumerate(schema.attributes):
            lookup = {c: i for i, c in enumerate(attr.categories)}
            column = frame[attr.name].astype(str)
            unknown = set(column) - set(lookup)
            if unknown:
                raise EncodingError(f"Unknown categories {sorted(unknown)} in column '{attr.name}'")
            codes[:, j] = column.map(lookup).to_numpy()
        return cls.from_codes(schema, codes)

    def reencode(self, schema: Schema) -> "Dataset":
        """Translate rows into another schema by category label."""
        if schema == self.schema:
            return self
        return Dataset.from_frame(self.to_frame(), schema)

    def save_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def load_csv(cls, path: Union[str, Path], schema: Schema) -> "Dataset":
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        logger.info(f"Loaded {len(frame)} rows from {path}")
        return cls.from_frame(frame, schema)


class NeighborVariant(str, Enum):
    """Neighboring relation audited by the game."""
    ADD_REMOVE = "add_remove"
    EDIT = "edit"


@dataclass(frozen=True)
class NeighborPair:
    """The two worlds of the distinguishing game.

    d1 always holds the target record x_T; d0 is the world without it
    (add/remove) or with y in its place (edit).
    """
    d0: Dataset
    d1: Dataset
    variant: NeighborVariant
    x_T: Record
    y: Optional[Record] = None

    @property
    def schema(self) -> Schema:
        return self.d1.schema

    def world(self, b: int) -> Dataset:
        """Dataset for world bit b."""
        return self.d1 if b else self.d0


def make_neighbors(
    d_minus: Dataset,
    x_T: Record,
    variant: NeighborVariant,
    y: Optional[Record] = None,
) -> NeighborPair:
    """Construct a neighboring pair around a base dataset.

    Args:
        d_minus: Rows shared by both worlds
        x_T: Target record, added to d1
        variant: ADD_REMOVE (d0 = d_minus) or EDIT (d0 = d_minus + y)
        y: Replacement record, required for EDIT

    Returns:
        NeighborPair whose datasets share d_minus's schema object

    Raises:
        EncodingError: If x_T or y is invalid under the schema
        ValueError: If EDIT is requested without y
        DegeneratePairError: If EDIT is requested with y equal to x_T
    """
    variant = NeighborVariant(variant)
    x_T.validate(d_minus.schema)
    d1 = d_minus.add(x_T)
    if variant == NeighborVariant.ADD_REMOVE:
        return NeighborPair(d0=d_minus, d1=d1, variant=variant, x_T=x_T)

    if y is None:
        raise ValueError("Edit neighbors require a replacement record y")
    y.validate(d_minus.schema)
    if y == x_T:
        raise DegeneratePairError("Edit neighbors with y == x_T are indistinguishable")
    return NeighborPair(d0=d_minus.add(y), d1=d1, variant=variant, x_T=x_T, y=y)
