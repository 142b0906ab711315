"""PrivBayes-like generator: a fixed Bayesian network with Laplace-noised tables.

Each of the k maximal families (tables not covered by a larger one) is
measured with budget eps/k. Under the edit relation one changed record moves
two cells by one, so every cell gets Laplace noise of scale 2k/eps. Covered
tables are marginalized from the noisy counts and cost nothing.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.dataset import Dataset
from src.core.schema import Schema
from src.errors import SchemaError
from src.mechanisms.base import (
    make_rng,
    normalize_structure,
    project_to_distribution,
    sample_categorical,
)

logger = logging.getLogger(__name__)

Structure = Tuple[Tuple[str, Tuple[str, ...]], ...]


@dataclass(frozen=True)
class ConditionalTable:
    """Noisy conditional distribution of one attribute given its parents.

    Both arrays have one axis per parent, in order, followed by the child axis.
    Tables that are not measured hold counts marginalized from a measured one.
    """
    attribute: str
    parents: Tuple[str, ...]
    noisy_counts: np.ndarray
    probabilities: np.ndarray
    measured: bool = True


@dataclass(frozen=True)
class PbModel:
    """Fitted Bayesian-network model."""
    schema: Schema
    structure: Structure
    tables: Tuple[ConditionalTable, ...]
    epsilon: float
    noise_scale: float
    seed: int


def default_structure(schema: Schema) -> Structure:
    """Chain network: every attribute conditioned on the one before it."""
    names = schema.names
    return tuple((name, (names[i - 1],) if i else ()) for i, name in enumerate(names))


def validate_structure(structure: Sequence, schema: Schema) -> Structure:
    """Check that a structure is a DAG in listed order covering the schema.

    Raises:
        SchemaError: On unknown attributes, missing or repeated attributes,
            or a parent that is not listed before its child
    """
    structure = normalize_structure(structure)
    seen = []
    for attr, parents in structure:
        schema.index_of(attr)
        if attr in seen:
            raise SchemaError(f"Attribute '{attr}' appears twice in the structure")
        for parent in parents:
            schema.index_of(parent)
            if parent not in seen:
                raise SchemaError(f"Parent '{parent}' of '{attr}' must be listed earlier")
        seen.append(attr)
    if sorted(seen) != sorted(schema.names):
        raise SchemaError(f"Structure covers {seen}, schema has {schema.names}")
    return structure


def exact_table_counts(codes: np.ndarray, schema: Schema, attr: str,
                       parents: Tuple[str, ...]) -> np.ndarray:
    """Contingency table of (parents..., attr) over integer-coded rows."""
    columns = [schema.index_of(p) for p in parents] + [schema.index_of(attr)]
    shape = tuple(schema.attributes[c].size for c in columns)
    counts = np.zeros(shape)
    if len(codes):
        np.add.at(counts, tuple(codes[:, c] for c in columns), 1.0)
    return counts


def measured_families(structure: Structure) -> Tuple[bool, ...]:
    """Which tables are measured directly.

    A table whose attributes are all covered by a larger table is derived
    from that table's noisy counts instead of being measured again.
    """
    scopes = [frozenset(parents) | {attr} for attr, parents in structure]
    return tuple(not any(scope < other for other in scopes) for scope in scopes)


def _marginalize(counts: np.ndarray, source: Tuple[str, ...], target: Tuple[str, ...]) -> np.ndarray:
    """Sum a table over the axes not in target and reorder to target's axis order."""
    drop = tuple(i for i, name in enumerate(source) if name not in target)
    kept = [name for name in source if name in target]
    return np.transpose(counts.sum(axis=drop), [kept.index(name) for name in target])


def pb_fit(
    d: Dataset,
    s: Schema,
    eps: float,
    structure: Optional[Sequence] = None,
    seed: int = 0,
    noise_scale_factor: float = 1.0,
) -> PbModel:
    """Fit noisy conditional tables on a dataset.

    Only maximal families are measured: with m of them, each gets budget
    eps/m and Laplace scale 2m/eps. The other tables are marginalized out
    of a measured table that covers them.

    Args:
        d: Training data, re-encoded into s if needed
        s: Schema the model is built on
        eps: Privacy budget, split evenly across measured tables
        structure: (attribute, parents) list; None means a chain
        seed: Seed of the noise
        noise_scale_factor: Multiplier on the calibrated Laplace scale

    Returns:
        PbModel with raw noisy counts and normalized conditionals

    Raises:
        ValueError: If eps is not positive
        SchemaError: If the structure does not fit the schema
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    structure = validate_structure(structure or default_structure(s), s)
    if d.schema != s:
        d = d.reencode(s)

    measured = measured_families(structure)
    k = sum(measured)
    scale = 2.0 * k / eps * noise_scale_factor
    rng = make_rng(seed)

    noisy_by_scope = {}
    for (attr, parents), is_measured in zip(structure, measured):
        if is_measured:
            exact = exact_table_counts(d.codes, s, attr, parents)
            noisy_by_scope[parents + (attr,)] = exact + rng.laplace(0.0, scale, size=exact.shape)

    tables = []
    for (attr, parents), is_measured in zip(structure, measured):
        scope = parents + (attr,)
        if is_measured:
            noisy = noisy_by_scope[scope]
        else:
            source = next(other for other in noisy_by_scope if set(scope) <= set(other))
            noisy = _marginalize(noisy_by_scope[source], source, scope)
        noisy.setflags(write=False)
        probabilities = project_to_distribution(noisy, axis=-1)
        probabilities.setflags(write=False)
        tables.append(ConditionalTable(attr, parents, noisy, probabilities, measured=is_measured))

    logger.debug(f"Fitted {len(tables)} tables ({k} measured) on {len(d)} rows with Laplace scale {scale:.4g}")
    return PbModel(
        schema=s,
        structure=structure,
        tables=tuple(tables),
        epsilon=float(eps),
        noise_scale=scale,
        seed=int(seed),
    )


def pb_sample(m: PbModel, n_out: int, seed: int) -> Dataset:
    """Ancestral sampling in structure order."""
    if n_out < 0:
        raise ValueError("n_out must be non-negative")
    rng = make_rng(seed)
    codes = np.zeros((n_out, len(m.schema)), dtype=np.int64)
    for table in m.tables:
        parent_cols = [m.schema.index_of(p) for p in table.parents]
        if parent_cols:
            probs = table.probabilities[tuple(codes[:, c] for c in parent_cols)]
        else:
            probs = np.broadcast_to(table.probabilities, (n_out, table.probabilities.shape[-1]))
        codes[:, m.schema.index_of(table.attribute)] = sample_categorical(rng, probs)
    return Dataset.from_codes(m.schema, codes)
