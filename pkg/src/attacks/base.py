"""Attack taxonomy and the threat-model rules tying attacks to generators."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.errors import IncompatibleAttackError
from src.mechanisms.base import MechanismFamily


class AttackKind(str, Enum):
    """Membership attacks, grouped by what the adversary gets to see.

    Black-box attacks see the synthetic data only. Passive white-box
    attacks also see the fitted model. The canary attack is active: it
    interferes with training through the GAN's training hook.
    """
    DCR = "dcr"
    QUERYBASED = "querybased"
    WHITEBOX_NAIVE = "whitebox_naive"
    WHITEBOX_ERROR = "whitebox_error"
    LOGAN = "logan"
    CANARY = "canary"

    @property
    def black_box(self) -> bool:
        return self in (AttackKind.DCR, AttackKind.QUERYBASED)

    @property
    def needs_meta(self) -> bool:
        """Scores come from a meta-classifier trained on shadow runs."""
        return self in (AttackKind.QUERYBASED, AttackKind.WHITEBOX_NAIVE, AttackKind.WHITEBOX_ERROR)

    @property
    def active(self) -> bool:
        return self == AttackKind.CANARY


_GAN_ONLY = (AttackKind.LOGAN, AttackKind.CANARY)
_MARGINAL_ONLY = (AttackKind.WHITEBOX_NAIVE, AttackKind.WHITEBOX_ERROR)


def check_compatible(attack: AttackKind, family: MechanismFamily) -> None:
    """Raise if the attack's threat model does not fit the generator.

    Raises:
        IncompatibleAttackError: For GAN attacks on marginal models and
            white-box marginal attacks on the GAN
    """
    attack = AttackKind(attack)
    family = MechanismFamily(family)
    if attack in _GAN_ONLY and family != MechanismFamily.GAN:
        raise IncompatibleAttackError(f"Attack '{attack.value}' needs a GAN, got '{family.value}'")
    if attack in _MARGINAL_ONLY and family == MechanismFamily.GAN:
        raise IncompatibleAttackError(
            f"Attack '{attack.value}' needs a PrivBayes or MST model, got '{family.value}'")


@dataclass(frozen=True)
class FeatureVector:
    """Attack features of one run."""
    values: np.ndarray
    provenance: AttackKind

    def __len__(self) -> int:
        return int(self.values.size)
