"""Active white-box attack on the DP-WGAN through its training hook.

Whenever the target record is drawn into a critic batch, its per-example
gradient is replaced by a Dirac canary: a vector of norm c_p that is zero
everywhere except at one critic parameter. The score is the sum over all
critic steps of the parameter update projected onto the canary.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from src.core.schema import Record, Schema
from src.errors import EncodingError
from src.mechanisms.gan import GanModel

logger = logging.getLogger(__name__)


class CanaryPlacement(str, Enum):
    """Critic parameter the canary sits on when no explicit index is given."""
    OUTPUT_BIAS = "output_bias"
    # first hidden unit's weight on x_T's first one-hot column; records
    # without that category have a zero gradient there
    TARGET_WEIGHT = "target_weight"


@dataclass(frozen=True)
class CanarySpec:
    """Dirac canary gradient.

    Attributes:
        index: Critic parameter carrying the canary; overrides placement
        norm: Canary magnitude, normally the gradient bound c_p
        placement: Where the canary goes when index is None
    """
    index: Optional[int] = None
    norm: float = 1.0
    placement: CanaryPlacement = CanaryPlacement.OUTPUT_BIAS

    def resolve_index(self, param_dim: int, target_column: Optional[int] = None) -> int:
        """Concrete parameter index for a critic of param_dim parameters.

        Args:
            param_dim: Critic parameter count
            target_column: One-hot column of x_T's first attribute in the
                training schema, used by TARGET_WEIGHT

        Raises:
            ValueError: If the index is outside the critic
        """
        if self.index is not None:
            index = self.index
        elif self.placement == CanaryPlacement.TARGET_WEIGHT and target_column is not None:
            # W is stored row-major first, so W[0, col] sits at col
            index = target_column
        else:
            index = param_dim - 1
        if not 0 <= index < param_dim:
            raise ValueError(f"Canary index {index} outside critic of {param_dim} parameters")
        return index

    def vector(self, param_dim: int, target_column: Optional[int] = None) -> np.ndarray:
        canary = np.zeros(param_dim)
        canary[self.resolve_index(param_dim, target_column)] = self.norm
        return canary


class CanaryObserver:
    """Training hook planting the canary and accumulating the attack score."""

    def __init__(self, spec: CanarySpec, target: Record, schema: Schema):
        self.spec = spec
        self.target_labels = target.labels(schema)
        self.target_codes: Optional[np.ndarray] = None
        self.canary: Optional[np.ndarray] = None
        self.score = 0.0
        self.insertions = 0

    def on_fit_start(self, schema: Schema, param_dim: int) -> None:
        """Locate the target in the schema the generator actually trains on."""
        try:
            self.target_codes = np.asarray(Record.from_labels(self.target_labels, schema).values)
        except EncodingError:
            # the training schema has no category for the target
            self.target_codes = None
        column = None if self.target_codes is None else int(schema.offsets[0] + self.target_codes[0])
        self.canary = self.spec.vector(param_dim, column)
        self.score = 0.0
        self.insertions = 0

    def on_critic_gradients(self, batch_codes: np.ndarray, per_example: np.ndarray) -> np.ndarray:
        if self.target_codes is None:
            return per_example
        hits = (batch_codes == self.target_codes[None, :]).all(axis=1)
        if not hits.any():
            return per_example
        replaced = per_example.copy()
        replaced[hits] = self.canary
        self.insertions += int(hits.sum())
        return replaced

    def on_critic_step(self, w_start: np.ndarray, w_after: np.ndarray) -> None:
        self.score += float(np.dot(w_after - w_start, self.canary))


def transcript_score(model: GanModel, canary: np.ndarray) -> float:
    """Sum of critic updates projected onto the canary, read from a transcript."""
    return float(sum(np.dot(step.w_after - step.w_start, canary) for step in model.transcript))


def canary_attack(
    spec: CanarySpec,
    target: Record,
    schema: Schema,
    param_dim: Optional[int] = None,
) -> Tuple[CanaryObserver, Callable[[GanModel], float]]:
    """Build the training hook and the score extractor for one fit.

    Args:
        spec: Canary placement and magnitude
        target: Record whose gradient is replaced
        schema: Schema the target is encoded under
        param_dim: Critic parameter count, checked against the index when known

    Returns:
        (observer to pass to the GAN fit, function mapping the fitted model to the score)

    Raises:
        ValueError: If the canary index is outside the critic
    """
    if param_dim is not None:
        column = int(schema.offsets[0] + target.values[0])
        spec.resolve_index(param_dim, column)
    observer = CanaryObserver(spec, target, schema)

    def extract(model: GanModel) -> float:
        if model.transcript and observer.canary is not None:
            return transcript_score(model, observer.canary)
        return observer.score

    return observer, extract
