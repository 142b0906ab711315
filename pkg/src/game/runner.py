"""Audit orchestration: play the game, split the scores, estimate epsilon.

The game population is split by run index into shadow, threshold and test
runs. Shadow runs train the meta-classifier of feature-based attacks, the
threshold split picks tau, and the test split yields the canonical
estimate. Cross-validation cuts all runs into folds and tests on each in
turn, retraining the meta-classifier and re-choosing tau on the others;
the fold mean and spread drive the verdict.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from sklearn.metrics import roc_auc_score

from src.attacks.base import AttackKind, FeatureVector
from src.attacks.canary import CanarySpec
from src.attacks.meta import export_features, train_meta
from src.core.dataset import Dataset, NeighborPair, NeighborVariant, make_neighbors
from src.core.schema import Record, Schema
from src.core.scores import ScoreSet, Split
from src.errors import ConfigError, EncodingError, SchemaError
from src.estimator import (
    AuditMethod,
    EpsilonEstimate,
    audit,
    max_auditable_eps,
    select_threshold,
)
from src.game.rounds import ProgressCallback, RoundSpec, derive_run_seed, play_rounds
from src.game.settings import AuditSettings
from src.mechanisms.base import MechanismConfig
from src.mechanisms.mst import validate_cliques
from src.mechanisms.privbayes import validate_structure
from src.worstcase import (
    WorstCaseKind,
    craft_worstcase,
    modal_record,
    rank_vulnerable,
    select_vulnerable,
)

logger = logging.getLogger(__name__)

__all__ = [
    "AuditConfig",
    "AuditReport",
    "Verdict",
    "build_config",
    "decide_verdict",
    "estimate_scores",
    "fold_roles",
    "max_auditable_eps",
    "resolve_pair",
    "run_audit",
    "run_game",
]


class Verdict(str, Enum):
    NO_VIOLATION = "NoViolationDetected"
    VIOLATION = "ViolationDetected"
    INCONCLUSIVE = "Inconclusive"


def decide_verdict(eps_emp: float, stddev: float, eps_claimed: float) -> Verdict:
    """Flag a violation only when eps_emp exceeds the claim by more than one stddev."""
    if eps_emp - stddev > eps_claimed:
        return Verdict.VIOLATION
    if eps_emp > eps_claimed:
        return Verdict.INCONCLUSIVE
    return Verdict.NO_VIOLATION


@dataclass(frozen=True)
class AuditConfig:
    """A fully resolved audit: the pair is built and the bug is planted."""
    mechanism: MechanismConfig
    attack: AttackKind
    pair: NeighborPair
    n_models: int = 1000
    split: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    synth_size: int = 100
    delta: float = 0.0
    confidence: float = 0.95
    method: AuditMethod = AuditMethod.EPS_DELTA_REGION
    folds: int = 5
    master_seed: int = 0
    canary: CanarySpec = field(default_factory=CanarySpec)
    echo: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError("split fractions must be non-negative and sum to 1")
        if self.n_models < 2 or self.folds < 1:
            raise ValueError("n_models must be >= 2 and folds >= 1")

    @property
    def round_spec(self) -> RoundSpec:
        return RoundSpec(
            mechanism=self.mechanism,
            attack=self.attack,
            pair=self.pair,
            synth_size=self.synth_size,
            query_seed=self.master_seed,
            canary=self.canary,
        )


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one audit.

    Wall-clock time and the score set travel with the report but are not
    part of its JSON form, which is identical across reruns.
    """
    estimate: EpsilonEstimate
    fold_estimates: Tuple[EpsilonEstimate, ...]
    fold_mean: float
    fold_std: float
    auc: Optional[float]
    claimed_epsilon: float
    verdict: Verdict
    split_sizes: Dict[str, int]
    config: Dict[str, Any]
    scores: Optional[ScoreSet] = field(default=None, compare=False, repr=False)
    elapsed_seconds: float = field(default=0.0, compare=False)

    @property
    def eps_emp(self) -> float:
        """Estimate the verdict is based on: the fold mean with several folds."""
        return self.fold_mean if len(self.fold_estimates) > 1 else self.estimate.eps_emp

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config,
            "claimed_epsilon": self.claimed_epsilon,
            "estimate": self.estimate.to_dict(),
            "folds": {
                "count": len(self.fold_estimates),
                "eps_emp": [e.eps_emp for e in self.fold_estimates],
                "mean": self.fold_mean,
                "stddev": self.fold_std,
                "estimates": [e.to_dict() for e in self.fold_estimates],
            },
            "eps_emp": self.eps_emp,
            "auc": self.auc,
            "verdict": self.verdict.value,
            "splits": self.split_sizes,
        }


def split_sizes(n_models: int, split: Tuple[float, float, float]) -> Tuple[int, int, int]:
    """Shadow, threshold and test counts; the test split takes the remainder."""
    n_shadow = int(round(n_models * split[0]))
    n_threshold = int(round(n_models * split[1]))
    return n_shadow, n_threshold, n_models - n_shadow - n_threshold


def _split_tags(n_models: int, split: Tuple[float, float, float]) -> np.ndarray:
    n_shadow, n_threshold, n_test = split_sizes(n_models, split)
    return np.array(
        [Split.SHADOW.value] * n_shadow + [Split.THRESHOLD.value] * n_threshold + [Split.TEST.value] * n_test,
        dtype=object,
    )


@dataclass(frozen=True)
class FoldRoles:
    """Positions, in run-index order, of the runs in each role of one fold."""
    shadow: np.ndarray
    threshold: np.ndarray
    test: np.ndarray


def fold_roles(n_models: int, folds: int, shadow_share: float) -> List[FoldRoles]:
    """Cross-validation roles of every run.

    All runs are cut into contiguous partitions and each partition is the
    test set once. The other runs are divided in order: the first
    shadow_share of them trains that fold's meta-classifier and the rest
    chooses tau.
    """
    if folds < 2:
        raise ValueError("Cross-validation needs at least two folds")
    parts = np.array_split(np.arange(n_models), folds)
    roles = []
    for f, test in enumerate(parts):
        rest = np.concatenate([p for g, p in enumerate(parts) if g != f])
        n_shadow = int(round(len(rest) * shadow_share))
        roles.append(FoldRoles(rest[:n_shadow], rest[n_shadow:], test))
    return roles


def _shadow_share(splits: np.ndarray) -> float:
    """Fraction of the shadow runs among shadow and threshold runs."""
    n_shadow = int(np.sum(splits == Split.SHADOW.value))
    n_threshold = int(np.sum(splits == Split.THRESHOLD.value))
    return n_shadow / (n_shadow + n_threshold) if n_shadow + n_threshold else 0.0


def _fold_meta_scores(cfg: AuditConfig, features: np.ndarray, labels: np.ndarray, tags: np.ndarray) -> np.ndarray:
    """Scores of every fold's meta-classifier; NaN on the runs that trained it."""
    fold_scores = np.full((len(labels), cfg.folds), np.nan)
    for f, roles in enumerate(fold_roles(len(labels), cfg.folds, _shadow_share(tags))):
        shadow = features[roles.shadow]
        shadow_labels = labels[roles.shadow]
        meta = train_meta(
            [FeatureVector(row, cfg.attack) for row in shadow[shadow_labels == 0]],
            [FeatureVector(row, cfg.attack) for row in shadow[shadow_labels == 1]],
            seed=cfg.master_seed + f + 1,
        )
        scored = np.setdiff1d(np.arange(len(labels)), roles.shadow)
        fold_scores[scored, f] = meta.score_matrix(features[scored])
    return fold_scores


def run_game(
    cfg: AuditConfig,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
    features_path: Optional[Path] = None,
) -> ScoreSet:
    """Play n_models rounds and score them.

    Feature-based attacks have their meta-classifier trained on the shadow
    runs here, and every run is then scored with it. With several folds,
    each fold also trains its own classifier on its share of the other
    folds' runs; those scores go to the fold columns of the score set.

    Args:
        cfg: Resolved audit configuration
        workers: Worker processes; the result does not depend on it
        progress_callback: Optional callback(current, total, message)
        features_path: Where to export the feature matrix of meta-classifier attacks

    Returns:
        ScoreSet ordered by run index with split tags
    """
    spec = cfg.round_spec
    seeds = [derive_run_seed(cfg.master_seed, i) for i in range(cfg.n_models)]
    tasks = [(i, seed, None) for i, seed in enumerate(seeds)]
    logger.info(
        f"Playing {cfg.n_models} rounds: {cfg.mechanism.family.value} "
        f"(bug={cfg.mechanism.bug}) vs {cfg.attack.value}, {workers} worker(s)"
    )
    results = play_rounds(spec, tasks, workers=workers, progress_callback=progress_callback)

    tags = _split_tags(cfg.n_models, cfg.split)
    labels = np.array([r.b for r in results], dtype=np.int64)
    fold_scores = None

    if cfg.attack.needs_meta:
        if features_path is not None:
            export_features([FeatureVector(r.features, cfg.attack) for r in results], labels, features_path)
        shadow = [r for r, tag in zip(results, tags) if tag == Split.SHADOW.value]
        meta = train_meta(
            [FeatureVector(r.features, cfg.attack) for r in shadow if r.b == 0],
            [FeatureVector(r.features, cfg.attack) for r in shadow if r.b == 1],
            seed=cfg.master_seed,
        )
        features = np.vstack([r.features for r in results])
        scores = meta.score_matrix(features)
        if cfg.folds > 1:
            fold_scores = _fold_meta_scores(cfg, features, labels, tags)
    else:
        scores = np.array([r.score for r in results], dtype=float)

    return ScoreSet.from_arrays(
        labels=labels,
        scores=scores,
        run_seeds=np.array(seeds, dtype=np.uint64),
        splits=tags,
        run_index=np.arange(cfg.n_models),
        fold_scores=fold_scores,
    )


def _fold_estimates(
    scores: ScoreSet,
    folds: int,
    delta: float,
    confidence: float,
    method: AuditMethod,
) -> List[EpsilonEstimate]:
    ordered = scores.select(np.argsort(scores.run_index, kind="stable"))
    shadow_share = 0.0
    if ordered.fold_scores is not None:
        if ordered.fold_scores.shape[1] != folds:
            raise ValueError(f"Score set holds {ordered.fold_scores.shape[1]} fold columns, not {folds}")
        shadow_share = _shadow_share(ordered.splits)

    estimates = []
    for i, roles in enumerate(fold_roles(len(ordered), folds, shadow_share)):
        fold_set = ordered if ordered.fold_scores is None else ordered.with_scores(ordered.fold_scores[:, i])
        holdout, test = fold_set.select(roles.threshold), fold_set.select(roles.test)
        if min(holdout.n0, holdout.n1, test.n0, test.n1) == 0:
            logger.warning(f"Fold {i} lacks one of the worlds, skipping it")
            continue
        tau = select_threshold(holdout, delta, method, confidence)
        estimates.append(audit(test, tau, delta, confidence, method))
    return estimates


def estimate_scores(
    scores: ScoreSet,
    delta: float,
    confidence: float = 0.95,
    method: AuditMethod = AuditMethod.EPS_DELTA_REGION,
    folds: int = 5,
) -> Tuple[EpsilonEstimate, List[EpsilonEstimate]]:
    """Headline estimate on the canonical split, plus per-fold estimates.

    Raises:
        ValueError: If the threshold or test split lacks one of the worlds
    """
    tau = select_threshold(scores.subset(Split.THRESHOLD), delta, method, confidence)
    canonical = audit(scores.subset(Split.TEST), tau, delta, confidence, method)
    if folds == 1:
        return canonical, [canonical]
    return canonical, _fold_estimates(scores, folds, delta, confidence, method)


def report_from_scores(
    scores: ScoreSet,
    claimed_epsilon: float,
    delta: float,
    confidence: float,
    method: AuditMethod,
    folds: int,
    echo: Dict[str, Any],
) -> AuditReport:
    """Estimate, fold spread, attack AUC and verdict for a score set."""
    method = AuditMethod(method)
    canonical, fold_estimates = estimate_scores(scores, delta, confidence, method, folds)
    values = np.array([e.eps_emp for e in fold_estimates]) if fold_estimates else np.array([canonical.eps_emp])
    fold_mean = float(values.mean())
    fold_std = float(values.std(ddof=1)) if len(values) > 1 else 0.0

    test = scores.subset(Split.TEST)
    auc = float(roc_auc_score(test.labels, test.scores)) if test.n0 and test.n1 else None

    headline = fold_mean if len(fold_estimates) > 1 else canonical.eps_emp
    verdict = decide_verdict(headline, fold_std, claimed_epsilon)
    sizes = {tag.value: int(np.sum(scores.splits == tag.value)) for tag in Split}
    logger.info(
        f"eps_emp={headline:.3f} +/- {fold_std:.3f} (max auditable {canonical.max_auditable_eps:.3f}), "
        f"claimed eps={claimed_epsilon}, verdict {verdict.value}"
    )
    return AuditReport(
        estimate=canonical,
        fold_estimates=tuple(fold_estimates),
        fold_mean=fold_mean,
        fold_std=fold_std,
        auc=auc,
        claimed_epsilon=float(claimed_epsilon),
        verdict=verdict,
        split_sizes=sizes,
        config=echo,
        scores=scores,
    )


def run_audit(
    cfg: AuditConfig,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
    features_path: Optional[Path] = None,
) -> AuditReport:
    """Run the game and estimate epsilon from its scores."""
    started = time.perf_counter()
    scores = run_game(cfg, workers=workers, progress_callback=progress_callback, features_path=features_path)
    report = report_from_scores(
        scores,
        claimed_epsilon=cfg.mechanism.epsilon,
        delta=cfg.delta,
        confidence=cfg.confidence,
        method=cfg.method,
        folds=cfg.folds,
        echo=cfg.echo,
    )
    return dataclasses.replace(report, elapsed_seconds=time.perf_counter() - started)


def _resolve(path: str, base_dir: Optional[Path]) -> Path:
    candidate = Path(path)
    if base_dir is not None and not candidate.is_absolute():
        candidate = base_dir / candidate
    return candidate


def check_mechanism_scope(settings: AuditSettings, schema: Schema) -> None:
    """Check the configured structure or cliques against the pair's schema.

    Raises:
        ConfigError: If they name unknown attributes or do not cover the schema
    """
    mechanism = settings.mechanism
    try:
        if mechanism.structure is not None:
            validate_structure(mechanism.structure, schema)
        if mechanism.cliques is not None:
            validate_cliques(mechanism.cliques, schema)
    except SchemaError as e:
        field_name = "structure" if mechanism.structure is not None else "cliques"
        raise ConfigError(f"mechanism.{field_name}: {e}") from e


def resolve_pair(
    settings: AuditSettings,
    base_dir: Optional[Path] = None,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> NeighborPair:
    """Build the neighboring pair described by a config.

    Relative paths are resolved against base_dir, normally the directory of
    the config file.
    """
    pair_settings = settings.pair
    variant = settings.resolved_variant
    try:
        schema = Schema.load_json(_resolve(pair_settings.schema_path, base_dir))
        reference = None
        if pair_settings.dataset_path is not None:
            reference = Dataset.load_csv(_resolve(pair_settings.dataset_path, base_dir), schema)
    except (OSError, SchemaError, EncodingError) as e:
        raise ConfigError(f"Cannot load pair data: {e}") from e

    if pair_settings.worstcase is not None:
        wc = pair_settings.worstcase
        min_rows = wc.min_rows or settings.mechanism.family.default_min_rows
        d_minus, x_T, y = craft_worstcase(
            schema,
            WorstCaseKind(small=wc.small, narrow=wc.narrow, repeat=wc.repeat),
            variant,
            seed=settings.master_seed,
            reference=reference,
            min_rows=min_rows,
        )
        pair = make_neighbors(d_minus, x_T, variant, y)
        check_mechanism_scope(settings, pair.schema)
        return pair

    check_mechanism_scope(settings, schema)
    if pair_settings.target_selection == "explicit":
        try:
            x_T = Record.from_labels(pair_settings.target, schema)
        except EncodingError as e:
            raise ConfigError(f"pair.target: {e}") from e
    elif pair_settings.target_selection == "rarest":
        x_T = reference.rows[int(rank_vulnerable(reference, 1)["row"].iloc[0])]
    else:
        x_T = select_vulnerable(
            reference,
            settings.mechanism.to_config(),
            settings.attack,
            V=min(pair_settings.vulnerable_candidates, len(reference)),
            reps=pair_settings.vulnerable_reps,
            seed=settings.master_seed,
            variant=variant,
            synth_size=settings.synth_size,
            workers=workers,
            progress_callback=progress_callback,
        )

    d_minus = reference.remove_one(x_T) if reference.count(x_T) else reference
    y = None
    if variant == NeighborVariant.EDIT:
        if pair_settings.replacement is not None:
            try:
                y = Record.from_labels(pair_settings.replacement, schema)
            except EncodingError as e:
                raise ConfigError(f"pair.replacement: {e}") from e
        else:
            y = modal_record(d_minus, settings.master_seed)
    logger.info(f"Average-case pair: |D-|={len(d_minus)}, x_T={x_T.labels(schema)}")
    return make_neighbors(d_minus, x_T, variant, y)


def build_config(
    settings: AuditSettings,
    base_dir: Optional[Path] = None,
    epsilon: Optional[float] = None,
    pair: Optional[NeighborPair] = None,
    workers: int = 1,
) -> AuditConfig:
    """Resolve a validated config into an AuditConfig.

    Args:
        settings: Validated config
        base_dir: Directory relative paths are resolved against
        epsilon: Override of the mechanism's epsilon, used by sweeps
        pair: Already built pair to reuse, used by sweeps
        workers: Worker processes for vulnerable-record selection
    """
    mechanism = settings.mechanism.to_config(epsilon)
    if pair is None:
        pair = resolve_pair(settings, base_dir, workers)

    echo = settings.model_dump(mode="json")
    echo["mechanism"]["epsilon"] = mechanism.epsilon
    echo["variant"] = settings.resolved_variant.value
    echo.pop("epsilons", None)
    echo.pop("compare_kinds", None)

    canary = CanarySpec(
        index=settings.canary.index,
        norm=settings.canary.norm if settings.canary.norm is not None else mechanism.gan.grad_bound,
        placement=settings.canary.placement,
    )
    return AuditConfig(
        mechanism=mechanism,
        attack=settings.attack,
        pair=pair,
        n_models=settings.n_models,
        split=tuple(settings.split),
        synth_size=settings.synth_size,
        delta=settings.audit_delta,
        confidence=settings.confidence,
        method=settings.method,
        folds=settings.folds,
        master_seed=settings.master_seed,
        canary=canary,
        echo=echo,
    )
