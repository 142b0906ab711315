"""Planted privacy violations.

Each bug rewrites a MechanismConfig so that the generator misbehaves in
one of the ways real implementations were found to:

- metadata_inference: the schema is read off the private input
- prng_reuse: every random stream is seeded with the same constant
- noise_scale_halved: the calibrated noise scale is multiplied by 0.5
- early_stop_data_dependent: the GAN trains for a number of iterations
  that depends on the input size
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict

from src.config import Config
from src.errors import BugNotApplicableError
from src.mechanisms.base import MechanismConfig, MechanismFamily

logger = logging.getLogger(__name__)


class BugKind(str, Enum):
    METADATA_INFERENCE = "metadata_inference"
    PRNG_REUSE = "prng_reuse"
    NOISE_SCALE_HALVED = "noise_scale_halved"
    EARLY_STOP_DATA_DEPENDENT = "early_stop_data_dependent"


@dataclass(frozen=True)
class BugSpec:
    """A bug kind and its optional parameters.

    Recognized params: "seed" for prng_reuse, "factor" for
    noise_scale_halved, "max_iterations" for early_stop_data_dependent.
    """
    kind: BugKind
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", BugKind(self.kind))


def applicable(kind: BugKind, family: MechanismFamily) -> bool:
    if BugKind(kind) == BugKind.EARLY_STOP_DATA_DEPENDENT:
        return MechanismFamily(family) == MechanismFamily.GAN
    return True


def inject_bug(mech_config: MechanismConfig, bug: BugSpec) -> MechanismConfig:
    """Return a copy of the configuration with the bug planted.

    Raises:
        BugNotApplicableError: If the bug cannot affect this family
    """
    if not applicable(bug.kind, mech_config.family):
        raise BugNotApplicableError(
            f"Bug '{bug.kind.value}' does not apply to mechanism '{mech_config.family.value}'"
        )

    if bug.kind == BugKind.METADATA_INFERENCE:
        changes = {"infer_metadata": True}
    elif bug.kind == BugKind.PRNG_REUSE:
        changes = {"seed_override": int(bug.params.get("seed", Config.PRNG_REUSE_SEED))}
    elif bug.kind == BugKind.NOISE_SCALE_HALVED:
        changes = {"noise_scale_factor": mech_config.noise_scale_factor * float(bug.params.get("factor", 0.5))}
    else:
        changes = {"data_dependent_stop": True}
        if "max_iterations" in bug.params:
            changes["gan"] = dataclasses.replace(
                mech_config.gan, max_iterations=int(bug.params["max_iterations"]))

    logger.info(f"Planted bug '{bug.kind.value}' in {mech_config.family.value}")
    return dataclasses.replace(mech_config, bug=bug.kind.value, **changes)
