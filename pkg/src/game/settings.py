"""Experiment configuration files, validated with pydantic.

A JSON config describes one audit: the mechanism (with an optional planted
bug), the attack, where the neighboring pair comes from, and how the game
and the estimate are run. Every seed is explicit.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.attacks.base import AttackKind, check_compatible
from src.attacks.canary import CanaryPlacement
from src.core.dataset import NeighborVariant
from src.errors import BugNotApplicableError, ConfigError, IncompatibleAttackError
from src.estimator import AuditMethod
from src.mechanisms.base import GanHyper, MechanismConfig, MechanismFamily
from src.mechanisms.bugs import BugKind, BugSpec, applicable, inject_bug

logger = logging.getLogger(__name__)


class BugSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: BugKind
    params: Dict[str, Any] = Field(default_factory=dict)


class MechanismSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: MechanismFamily
    epsilon: float = Field(gt=0)
    delta: float = Field(default=0.0, ge=0, lt=1)
    structure: Optional[List[Tuple[str, List[str]]]] = None
    cliques: Optional[List[List[str]]] = None
    gan: Dict[str, Any] = Field(default_factory=dict)
    bug: Optional[BugSettings] = None

    @model_validator(mode="after")
    def _check(self) -> "MechanismSettings":
        if self.family != MechanismFamily.PRIVBAYES and self.delta <= 0:
            raise ValueError(f"mechanism.delta must be in (0, 1) for {self.family.value}")
        if self.bug is not None and not applicable(self.bug.kind, self.family):
            raise ValueError(f"bug '{self.bug.kind.value}' does not apply to {self.family.value}")
        unknown = set(self.gan) - set(GanHyper.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown mechanism.gan fields {sorted(unknown)}")
        try:
            GanHyper(**self.gan)
        except (TypeError, ValueError) as e:
            raise ValueError(f"mechanism.gan: {e}") from e
        return self

    def to_config(self, epsilon: Optional[float] = None) -> MechanismConfig:
        """MechanismConfig with the bug planted, optionally at another epsilon."""
        config = MechanismConfig(
            family=self.family,
            epsilon=self.epsilon if epsilon is None else epsilon,
            delta=self.delta,
            structure=self.structure,
            cliques=self.cliques,
            gan=GanHyper(**self.gan),
        )
        if self.bug is not None:
            config = inject_bug(config, BugSpec(self.bug.kind, dict(self.bug.params)))
        return config


class WorstCaseSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    small: bool = True
    narrow: bool = False
    repeat: bool = False
    min_rows: Optional[int] = Field(default=None, ge=1)


class PairSettings(BaseModel):
    """Where the neighboring pair comes from.

    With `worstcase` set the pair is crafted; otherwise `dataset_path` is
    the average-case base data and `target_selection` picks x_T from it.
    """
    model_config = ConfigDict(extra="forbid")

    schema_path: str
    dataset_path: Optional[str] = None
    worstcase: Optional[WorstCaseSettings] = None
    target_selection: Literal["explicit", "rarest", "vulnerable"] = "rarest"
    target: Optional[List[str]] = None
    replacement: Optional[List[str]] = None
    vulnerable_candidates: int = Field(default=100, ge=1)
    vulnerable_reps: int = Field(default=64, ge=2)

    @model_validator(mode="after")
    def _check(self) -> "PairSettings":
        if self.worstcase is None and self.dataset_path is None:
            raise ValueError("pair needs either worstcase or dataset_path")
        if self.worstcase is not None and not self.worstcase.small and self.dataset_path is None:
            raise ValueError("pair.worstcase without small needs dataset_path")
        if self.target_selection == "explicit" and self.target is None:
            raise ValueError("pair.target is required when target_selection is 'explicit'")
        if self.vulnerable_reps % 2:
            raise ValueError("pair.vulnerable_reps must be even")
        return self


class CanarySettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    index: Optional[int] = Field(default=None, ge=0)
    norm: Optional[float] = Field(default=None, gt=0)
    placement: CanaryPlacement = CanaryPlacement.OUTPUT_BIAS


class AuditSettings(BaseModel):
    """One audit experiment."""
    model_config = ConfigDict(extra="forbid")

    mechanism: MechanismSettings
    attack: AttackKind
    pair: PairSettings
    variant: Optional[NeighborVariant] = None
    n_models: int = Field(default=1000, ge=2)
    split: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    synth_size: int = Field(default=100, ge=1)
    delta: Optional[float] = Field(default=None, ge=0, lt=1)
    confidence: float = Field(default=0.95, gt=0, lt=1)
    method: AuditMethod = AuditMethod.EPS_DELTA_REGION
    folds: int = Field(default=5, ge=1)
    master_seed: int = Field(default=0, ge=0)
    canary: CanarySettings = Field(default_factory=CanarySettings)
    epsilons: Optional[List[float]] = None
    compare_kinds: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check(self) -> "AuditSettings":
        if any(f < 0 for f in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must be non-negative and sum to 1")
        if self.method == AuditMethod.GDP_CONVERT:
            if self.mechanism.family.pure_epsilon:
                raise ValueError(
                    f"method gdp_convert is not available for the pure-epsilon "
                    f"{self.mechanism.family.value} mechanism")
            if self.audit_delta <= 0:
                raise ValueError("method gdp_convert needs delta > 0")
        if self.epsilons is not None and (not self.epsilons or min(self.epsilons) <= 0):
            raise ValueError("epsilons must be a non-empty list of positive values")
        try:
            check_compatible(self.attack, self.mechanism.family)
        except IncompatibleAttackError as e:
            raise ValueError(str(e)) from e
        if self.split[0] == 0 and self.attack.needs_meta:
            raise ValueError(f"attack '{self.attack.value}' needs a non-empty shadow split")
        worstcase = self.pair.worstcase
        if self.mechanism.family == MechanismFamily.GAN and worstcase is not None and worstcase.small:
            rows = worstcase.min_rows or self.mechanism.family.default_min_rows
            batch = GanHyper(**self.mechanism.gan).batch_size
            if batch > rows:
                raise ValueError(
                    f"mechanism.gan.batch_size {batch} exceeds the {rows} rows of the small base dataset")
        return self

    @property
    def resolved_variant(self) -> NeighborVariant:
        """Neighboring relation of the game.

        Defaults to the relation the mechanism is calibrated for: PrivBayes
        bounds each table's sensitivity by 2, which holds under edit, while
        MST and the GAN are calibrated for add/remove.
        """
        if self.variant is not None:
            return self.variant
        if self.mechanism.family.pure_epsilon:
            return NeighborVariant.EDIT
        return NeighborVariant.ADD_REMOVE

    @property
    def audit_delta(self) -> float:
        """Delta of the estimate; defaults to the mechanism's delta."""
        return self.mechanism.delta if self.delta is None else self.delta


def parse_settings(data: Dict[str, Any]) -> AuditSettings:
    """Validate a config document.

    Raises:
        ConfigError: With the offending field named in the message
    """
    try:
        return AuditSettings.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid audit config: {problems}") from e
    except BugNotApplicableError as e:
        raise ConfigError(str(e)) from e


def load_settings(path: Union[str, Path]) -> AuditSettings:
    """Read and validate a JSON config file.

    Raises:
        ConfigError: If the file cannot be read, is not JSON, or fails validation
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    settings = parse_settings(data)
    logger.info(f"Loaded audit config {path}: {settings.mechanism.family.value} / {settings.attack.value}")
    return settings
