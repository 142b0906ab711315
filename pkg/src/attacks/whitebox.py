"""Passive white-box attacks: they see the fitted model as well as its output.

Model tables are embedded into the reference schema by category label, so
feature vectors keep a fixed length even when a model was fitted on a
schema inferred from its input.
"""

import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.attacks.base import AttackKind, FeatureVector
from src.core.dataset import Dataset
from src.core.schema import Record, Schema, encode_one_hot, project_one_hot
from src.errors import SchemaError
from src.mechanisms.gan import GanModel, critic_forward
from src.mechanisms.mst import MstModel, exact_marginal
from src.mechanisms.privbayes import PbModel, exact_table_counts

logger = logging.getLogger(__name__)


class WhiteboxVariant(str, Enum):
    NAIVE = "naive"
    ERROR = "error"

    @property
    def attack_kind(self) -> AttackKind:
        return AttackKind.WHITEBOX_NAIVE if self == WhiteboxVariant.NAIVE else AttackKind.WHITEBOX_ERROR


def embed_table(table: np.ndarray, attrs: Sequence[str], source: Schema, target: Schema) -> np.ndarray:
    """Place a table indexed by source categories into the target layout.

    Target cells with no source category stay zero.

    Raises:
        SchemaError: If an attribute or category is missing from the target
    """
    index_maps = []
    for name in attrs:
        try:
            target_attr = target.attributes[target.index_of(name)]
        except SchemaError:
            raise SchemaError(f"Model attribute '{name}' is not in the reference schema") from None
        source_attr = source.attributes[source.index_of(name)]
        try:
            index_maps.append([target_attr.categories.index(c) for c in source_attr.categories])
        except ValueError:
            raise SchemaError(f"Model categories of '{name}' are not in the reference schema") from None

    out = np.zeros(tuple(target.attributes[target.index_of(n)].size for n in attrs))
    out[np.ix_(*index_maps)] = table
    return out


def _model_tables(model: Union[PbModel, MstModel], variant: WhiteboxVariant) -> List[Tuple[Tuple[str, ...], np.ndarray]]:
    """(attributes, noisy counts) pairs in canonical order.

    Naive features flatten every PrivBayes table; error features only use
    the measured ones, since the others are sums of measured cells.
    """
    if isinstance(model, PbModel):
        return [(t.parents + (t.attribute,), t.noisy_counts) for t in model.tables
                if t.measured or variant == WhiteboxVariant.NAIVE]
    if isinstance(model, MstModel):
        return [(m.clique, m.noisy_counts) for m in model.marginals]
    raise SchemaError(f"White-box features need a PrivBayes or MST model, got {type(model).__name__}")


def _exact_counts(model: Union[PbModel, MstModel], attrs: Tuple[str, ...], d_ref: Dataset) -> np.ndarray:
    if isinstance(model, PbModel):
        return exact_table_counts(d_ref.codes, d_ref.schema, attrs[-1], attrs[:-1])
    return exact_marginal(d_ref.codes, d_ref.schema, attrs)


def wb_features(
    model: Union[PbModel, MstModel],
    variant: WhiteboxVariant,
    d_ref: Dataset,
    d_other: Optional[Dataset] = None,
) -> FeatureVector:
    """Features read directly from a fitted marginal model.

    Args:
        model: Fitted PrivBayes-like or MST-like model
        variant: NAIVE flattens the noisy tables (PrivBayes counts or MST
            marginals); ERROR sums, per measured table, the signed difference
            between noisy counts and exact counts of d_ref
        d_ref: Candidate training dataset whose schema is the reference layout
        d_other: The other candidate dataset. With ERROR, each table also
            gets the error summed over the cells where the two candidates
            differ, signed by the direction of the difference

    Returns:
        FeatureVector of fixed length for a given structure and reference schema

    Raises:
        SchemaError: If the model structure does not fit d_ref's schema
    """
    variant = WhiteboxVariant(variant)
    target = d_ref.schema
    totals, local = [], []
    for attrs, table in _model_tables(model, variant):
        embedded = embed_table(table, attrs, model.schema, target)
        if variant == WhiteboxVariant.NAIVE:
            totals.append(embedded.ravel())
            continue
        error = embedded - _exact_counts(model, attrs, d_ref)
        totals.append(np.array([np.sum(error)]))
        if d_other is not None:
            # the cells x_T (and y under edit) land in
            direction = np.sign(_exact_counts(model, attrs, d_other) - _exact_counts(model, attrs, d_ref))
            local.append(np.array([np.sum(error * direction)]))
    return FeatureVector(np.concatenate(totals + local).astype(float), variant.attack_kind)


def logan_score(model: GanModel, x_T: Record, schema: Optional[Schema] = None) -> float:
    """Critic output on the one-hot target record.

    Args:
        model: Fitted GAN
        x_T: Target record
        schema: Schema x_T is encoded under, when it differs from the model's
    """
    if schema is None or schema == model.schema:
        x = encode_one_hot(x_T, model.schema)
    else:
        x = project_one_hot(x_T, schema, model.schema)
    return float(critic_forward(model.critic_params, x, model.hyper.hidden_dim)[0])
