"""Mechanism configuration shared by the three generators."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np


class MechanismFamily(str, Enum):
    """Synthetic-data generators the auditor can target."""
    PRIVBAYES = "privbayes"
    MST = "mst"
    GAN = "gan"

    @property
    def pure_epsilon(self) -> bool:
        """Laplace-based families claim pure epsilon-DP and have no GDP curve."""
        return self == MechanismFamily.PRIVBAYES

    @property
    def default_min_rows(self) -> int:
        """Smallest base dataset the family can be fit on."""
        return 4 if self == MechanismFamily.GAN else 2


@dataclass(frozen=True)
class GanHyper:
    """Hyper-parameters of the differentially private WGAN.

    Attributes:
        iterations: Generator iterations T
        n_critic: Critic steps per generator iteration
        batch_size: Batch size L, also the number of generator samples per step
        learning_rate: Step size alpha for critic and generator
        weight_clip: Critic weights are clipped to [-weight_clip, weight_clip]
        grad_bound: Per-example gradient norm bound c_p
        latent_dim: Generator input dimension
        hidden_dim: Hidden units in generator and critic
        rmsprop_decay: Decay of the squared-gradient average
        max_iterations: Cap on T when the stopping rule depends on the data
        test_mode: Plain SGD updates and no accountant check
        sigma_override: Noise multiplier used instead of the budget-derived one
        zero_fake_gradients: Drop the generator-sample term of the critic gradient
        record_transcript: Keep per-step critic snapshots on the model
    """
    iterations: int = 50
    n_critic: int = 5
    batch_size: int = 2
    learning_rate: float = 0.01
    weight_clip: float = 0.5
    grad_bound: float = 1.0
    latent_dim: int = 8
    hidden_dim: int = 16
    rmsprop_decay: float = 0.9
    max_iterations: int = 500
    test_mode: bool = False
    sigma_override: Optional[float] = None
    zero_fake_gradients: bool = False
    record_transcript: bool = True

    def __post_init__(self):
        if self.iterations < 1 or self.n_critic < 1 or self.batch_size < 1:
            raise ValueError("iterations, n_critic and batch_size must be positive")
        if self.weight_clip <= 0 or self.grad_bound <= 0 or self.learning_rate <= 0:
            raise ValueError("weight_clip, grad_bound and learning_rate must be positive")
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ValueError("sigma_override must be non-negative")

    @property
    def critic_steps(self) -> int:
        return self.iterations * self.n_critic


@dataclass(frozen=True)
class MechanismConfig:
    """Everything needed to fit one generator, including planted bugs.

    The bug switches are only meant to be set through inject_bug.

    Attributes:
        family: Generator family
        epsilon: Claimed privacy budget
        delta: Claimed delta (0 for pure epsilon-DP families)
        structure: PrivBayes (attribute, parents) list; None means a chain
        cliques: MST measured cliques; None means a chain of pairs
        gan: GAN hyper-parameters
        noise_scale_factor: Multiplier on the calibrated noise scale
        infer_metadata: Fit on a schema inferred from the input rows
        seed_override: Fixed seed replacing every fit and sample seed
        data_dependent_stop: GAN iteration count depends on the input size
        bug: Name of the planted bug, for reporting
    """
    family: MechanismFamily
    epsilon: float
    delta: float = 0.0
    structure: Optional[Tuple[Tuple[str, Tuple[str, ...]], ...]] = None
    cliques: Optional[Tuple[Tuple[str, ...], ...]] = None
    gan: GanHyper = field(default_factory=GanHyper)
    noise_scale_factor: float = 1.0
    infer_metadata: bool = False
    seed_override: Optional[int] = None
    data_dependent_stop: bool = False
    bug: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "family", MechanismFamily(self.family))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta={self.delta} outside [0, 1)")
        if self.family != MechanismFamily.PRIVBAYES and self.delta <= 0:
            raise ValueError(f"{self.family.value} needs delta in (0, 1)")
        if self.structure is not None:
            object.__setattr__(self, "structure", normalize_structure(self.structure))
        if self.cliques is not None:
            object.__setattr__(self, "cliques", tuple(tuple(c) for c in self.cliques))


def normalize_structure(structure: Sequence) -> Tuple[Tuple[str, Tuple[str, ...]], ...]:
    """Coerce a structure given as nested lists into hashable tuples."""
    return tuple((str(attr), tuple(str(p) for p in parents)) for attr, parents in structure)


def make_rng(seed: int) -> np.random.Generator:
    """Random generator for an explicit seed; seeds are never drawn from entropy."""
    return np.random.default_rng(int(seed))


def sample_categorical(rng: np.random.Generator, probabilities: np.ndarray) -> np.ndarray:
    """Draw one category per row of an (n, k) probability matrix."""
    n = probabilities.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cumulative = np.cumsum(probabilities, axis=1)
    u = rng.random(n) * cumulative[:, -1]
    choice = (cumulative <= u[:, None]).sum(axis=1)
    return np.minimum(choice, probabilities.shape[1] - 1).astype(np.int64)


def project_to_distribution(counts: np.ndarray, axis: int = -1) -> np.ndarray:
    """Clamp negative counts to zero and normalize along an axis.

    Slices that sum to zero become uniform.
    """
    clamped = np.maximum(np.asarray(counts, dtype=float), 0.0)
    totals = clamped.sum(axis=axis, keepdims=True)
    size = clamped.shape[axis]
    with np.errstate(invalid="ignore", divide="ignore"):
        normalized = clamped / totals
    return np.where(totals > 0, normalized, 1.0 / size)
