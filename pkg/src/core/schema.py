"""Schemas, records and one-hot encoding for categorical tables.

The Schema is the single authority translating category strings to the
integer indices stored in records.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import EncodingError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Attribute:
    """A categorical column: its name and ordered category labels.

    One category is allowed here for inferred metadata; declared schema
    files are held to two by Schema.load_json.
    """
    name: str
    categories: Tuple[str, ...]

    def __post_init__(self):
        if not self.categories:
            raise SchemaError(f"Attribute '{self.name}' has no categories")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"Attribute '{self.name}' has duplicate categories")

    @property
    def size(self) -> int:
        """Number of categories."""
        return len(self.categories)


@dataclass(frozen=True)
class Schema:
    """Ordered attribute list with categorical domains.

    Attributes:
        attributes: Attributes in column order
    """
    attributes: Tuple[Attribute, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"Attribute names must be unique, got {names}")

    @classmethod
    def from_columns(cls, columns: Sequence[Tuple[str, Sequence[str]]]) -> "Schema":
        """Build a schema from (name, categories) pairs."""
        return cls(tuple(Attribute(name, tuple(str(c) for c in cats)) for name, cats in columns))

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.attributes]

    @property
    def sizes(self) -> List[int]:
        return [a.size for a in self.attributes]

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start position of each attribute block in the one-hot vector."""
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)

    @property
    def one_hot_dim(self) -> int:
        """Total one-hot dimension, the sum of all domain sizes."""
        return int(sum(self.sizes))

    def __len__(self) -> int:
        return len(self.attributes)

    def index_of(self, name: str) -> int:
        """Position of an attribute by name.

        Raises:
            SchemaError: If the attribute is unknown
        """
        for i, attr in enumerate(self.attributes):
            if attr.name == name:
                return i
        raise SchemaError(f"Unknown attribute '{name}'")

    def truncate(self, n_attributes: int) -> "Schema":
        """Schema restricted to its first n attributes."""
        return Schema(self.attributes[:n_attributes])

    def is_subschema_of(self, other: "Schema") -> bool:
        """True if attribute names match and every category list is contained in other's."""
        if self.names != other.names:
            return False
        return all(set(a.categories) <= set(b.categories)
                   for a, b in zip(self.attributes, other.attributes))

    def to_dict(self) -> Dict:
        return {"attributes": [{"name": a.name, "categories": list(a.categories)}
                               for a in self.attributes]}

    @classmethod
    def from_dict(cls, data: Dict) -> "Schema":
        try:
            return cls.from_columns([(a["name"], a["categories"]) for a in data["attributes"]])
        except (KeyError, TypeError) as e:
            raise SchemaError(f"Malformed schema document: {e}") from e

    def save_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load_json(cls, path: Union[str, Path]) -> "Schema":
        """Read a declared schema file.

        Declared attributes need at least two categories. Schemas inferred
        from data may hold constant columns and are never read from a file.

        Raises:
            SchemaError: On a malformed document or a single-category attribute
        """
        schema = cls.from_dict(json.loads(Path(path).read_text()))
        constant = [a.name for a in schema.attributes if a.size < 2]
        if constant:
            raise SchemaError(f"Declared attributes need at least two categories: {constant}")
        return schema


@dataclass(frozen=True)
class Record:
    """One row: a category index per schema attribute."""
    values: Tuple[int, ...]

    def validate(self, schema: Schema) -> None:
        """Check the record against a schema.

        Raises:
            EncodingError: On arity mismatch or an out-of-range index
        """
        if len(self.values) != len(schema):
            raise EncodingError(
                f"Record has {len(self.values)} values, schema has {len(schema)} attributes"
            )
        for value, attr in zip(self.values, schema.attributes):
            if not 0 <= value < attr.size:
                raise EncodingError(
                    f"Index {value} out of range for '{attr.name}' ({attr.size} categories)"
                )

    def labels(self, schema: Schema) -> Tuple[str, ...]:
        """Category strings of this record under a schema."""
        self.validate(schema)
        return tuple(a.categories[v] for v, a in zip(self.values, schema.attributes))

    @classmethod
    def from_labels(cls, labels: Sequence[str], schema: Schema) -> "Record":
        """Encode category strings into a record.

        Raises:
            EncodingError: If a label is not a category of its attribute
        """
        if len(labels) != len(schema):
            raise EncodingError(f"Expected {len(schema)} labels, got {len(labels)}")
        values = []
        for label, attr in zip(labels, schema.attributes):
            try:
                values.append(attr.categories.index(str(label)))
            except ValueError:
                raise EncodingError(f"'{label}' is not a category of '{attr.name}'") from None
        return cls(tuple(values))


def encode_one_hot(record: Record, schema: Schema) -> np.ndarray:
    """One-hot encode a record.

    Args:
        record: Record valid under schema
        schema: Schema defining the attribute blocks

    Returns:
        Vector of length schema.one_hot_dim with exactly one 1 per block

    Raises:
        EncodingError: If the record is invalid under the schema
    """
    record.validate(schema)
    vector = np.zeros(schema.one_hot_dim)
    vector[schema.offsets + np.asarray(record.values, dtype=np.int64)] = 1.0
    return vector


def project_one_hot(record: Record, source: Schema, target: Schema) -> np.ndarray:
    """One-hot encode a record of `source` inside the blocks of `target`.

    Categories absent from the target schema leave their block all zero.
    Used when a fitted model carries a schema inferred from its input.
    """
    if source.names != target.names:
        raise SchemaError("Schemas disagree on attribute names")
    vector = np.zeros(target.one_hot_dim)
    for offset, label, attr in zip(target.offsets, record.labels(source), target.attributes):
        if label in attr.categories:
            vector[offset + attr.categories.index(label)] = 1.0
    return vector


def infer_metadata(table: pd.DataFrame) -> Schema:
    """Derive a schema from the values observed in a raw table.

    Categories are the lexicographically sorted distinct values of each
    column. This is the metadata-from-input behaviour whose privacy leak
    the auditor is meant to catch.

    Args:
        table: Raw table of category strings

    Returns:
        Schema with one attribute per column

    Raises:
        SchemaError: If the table has no rows
    """
    if len(table) == 0:
        raise SchemaError("Cannot infer metadata from an empty table")
    columns = [(str(col), sorted(table[col].astype(str).unique())) for col in table.columns]
    logger.debug(f"Inferred metadata for {len(columns)} columns from {len(table)} rows")
    return Schema.from_columns(columns)
