"""Black-box attacks: they only see the synthetic dataset."""

import logging
from typing import Tuple

import numpy as np

from src.attacks.base import AttackKind, FeatureVector
from src.core.dataset import Dataset
from src.core.schema import Record, Schema, encode_one_hot

logger = logging.getLogger(__name__)

N_CONJUNCTIONS = 16
CONJUNCTION_WIDTH = 3


def dcr_score(x_T: Record, synth: Dataset) -> float:
    """Negative distance from the target to its closest synthetic record.

    Distances are Euclidean between one-hot encodings, so the score is 0
    exactly when x_T appears in synth.

    Raises:
        ValueError: If synth is empty
    """
    if len(synth) == 0:
        raise ValueError("DCR needs at least one synthetic record")
    target = encode_one_hot(x_T, synth.schema)
    distances = np.linalg.norm(synth.one_hot() - target[None, :], axis=1)
    return float(-distances.min())


def query_conjunctions(schema: Schema, query_seed: int) -> Tuple[Tuple[int, ...], ...]:
    """Attribute triples used by the conjunction queries, drawn from query_seed."""
    rng = np.random.default_rng(int(query_seed))
    width = min(CONJUNCTION_WIDTH, len(schema))
    return tuple(
        tuple(int(i) for i in np.sort(rng.choice(len(schema), size=width, replace=False)))
        for _ in range(N_CONJUNCTIONS)
    )


def qb_features(synth: Dataset, x_T: Record, s: Schema, query_seed: int = 0) -> FeatureVector:
    """Counting queries targeted at x_T.

    Features are, in order: rows matching x_T on each single attribute,
    rows matching x_T on each of 16 seeded attribute triples, and rows
    equal to x_T.
    """
    x_T.validate(s)
    if synth.schema != s:
        synth = synth.reencode(s)
    target = np.asarray(x_T.values, dtype=np.int64)
    matches = synth.codes == target[None, :]

    single = matches.sum(axis=0)
    conjunctions = [matches[:, list(attrs)].all(axis=1).sum()
                    for attrs in query_conjunctions(s, query_seed)]
    full = matches.all(axis=1).sum() if len(synth) else 0

    values = np.concatenate([single, conjunctions, [full]]).astype(float)
    return FeatureVector(values, AttackKind.QUERYBASED)
