"""One round of the distinguishing game, and a pool to play many.

A round draws the world bit b, fits the generator on the world's dataset
and lets the attack score the outcome with exactly what its threat model
allows it to see.
"""

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.attacks.base import AttackKind, check_compatible
from src.attacks.blackbox import dcr_score, qb_features
from src.attacks.canary import CanarySpec, canary_attack
from src.attacks.whitebox import WhiteboxVariant, logan_score, wb_features
from src.core.dataset import NeighborPair
from src.mechanisms.base import MechanismConfig, make_rng
from src.mechanisms.gan import critic_param_dim
from src.mechanisms.pipeline import GenModel, fit_model, sample_model

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int, str], None]

SEED_BOUND = 2 ** 63


def derive_run_seed(master_seed: int, run_index: int) -> int:
    """Stable 64-bit seed of one run, independent of scheduling."""
    digest = hashlib.blake2b(f"{master_seed}:{run_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class RoundSpec:
    """Everything a worker needs to play rounds."""
    mechanism: MechanismConfig
    attack: AttackKind
    pair: NeighborPair
    synth_size: int = 100
    query_seed: int = 0
    canary: CanarySpec = field(default_factory=CanarySpec)

    def __post_init__(self):
        object.__setattr__(self, "attack", AttackKind(self.attack))
        check_compatible(self.attack, self.mechanism.family)
        if self.synth_size < 1:
            raise ValueError("synth_size must be positive")


@dataclass(frozen=True)
class RoundResult:
    """Outcome of one round: a score, or features awaiting the meta-classifier."""
    run_index: int
    b: int
    run_seed: int
    score: float = math.nan
    features: Optional[np.ndarray] = None


def _round_seeds(run_seed: int, b: Optional[int]) -> Tuple[int, int, int]:
    """World bit, fit seed and sample seed of a run, always drawn in this order."""
    rng = make_rng(run_seed)
    drawn_b = int(rng.integers(2))
    fit_seed = int(rng.integers(SEED_BOUND))
    sample_seed = int(rng.integers(SEED_BOUND))
    return (drawn_b if b is None else int(b)), fit_seed, sample_seed


def _canary_hook(spec: RoundSpec):
    param_dim = critic_param_dim(spec.pair.schema.one_hot_dim, spec.mechanism.gan.hidden_dim)
    return canary_attack(spec.canary, spec.pair.x_T, spec.pair.schema, param_dim)


def replay_model(spec: RoundSpec, run_seed: int, b: Optional[int] = None) -> Tuple[int, GenModel]:
    """Refit the model of one run exactly as the game fitted it.

    Returns:
        (world bit, fitted model)
    """
    b, fit_seed, _ = _round_seeds(run_seed, b)
    observer = _canary_hook(spec)[0] if spec.attack == AttackKind.CANARY else None
    model = fit_model(spec.mechanism, spec.pair.world(b), spec.pair.schema, fit_seed, observer=observer)
    return b, model


def play_round(spec: RoundSpec, run_index: int, run_seed: int, b: Optional[int] = None) -> RoundResult:
    """Play one round of the game.

    Args:
        spec: Mechanism, attack and neighboring pair
        run_index: Position of the round in the game
        run_seed: Seed every random choice of the round derives from
        b: Force the world bit instead of drawing it

    Returns:
        RoundResult with a score, or with features for meta-classifier attacks
    """
    b, fit_seed, sample_seed = _round_seeds(run_seed, b)
    pair = spec.pair
    data = pair.world(b)
    attack = spec.attack

    if attack == AttackKind.CANARY:
        observer, extract = _canary_hook(spec)
        model = fit_model(spec.mechanism, data, pair.schema, fit_seed, observer=observer)
        return RoundResult(run_index, b, run_seed, score=extract(model))

    model = fit_model(spec.mechanism, data, pair.schema, fit_seed)

    if attack.black_box:
        # black-box attacks only ever receive the synthetic rows
        synth = sample_model(spec.mechanism, model, spec.synth_size, sample_seed).reencode(pair.schema)
        if attack == AttackKind.DCR:
            return RoundResult(run_index, b, run_seed, score=dcr_score(pair.x_T, synth))
        features = qb_features(synth, pair.x_T, pair.schema, spec.query_seed)
        return RoundResult(run_index, b, run_seed, features=features.values)

    if attack == AttackKind.LOGAN:
        return RoundResult(run_index, b, run_seed, score=logan_score(model, pair.x_T, pair.schema))

    variant = WhiteboxVariant.NAIVE if attack == AttackKind.WHITEBOX_NAIVE else WhiteboxVariant.ERROR
    features = wb_features(model, variant, pair.d0, pair.d1)
    return RoundResult(run_index, b, run_seed, features=features.values)


RunTask = Tuple[int, int, Optional[int]]


def _play_chunk(spec: RoundSpec, tasks: Sequence[RunTask]) -> List[RoundResult]:
    return [play_round(spec, index, seed, b) for index, seed, b in tasks]


def play_rounds(
    spec: RoundSpec,
    tasks: Sequence[RunTask],
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[RoundResult]:
    """Play many rounds, in worker processes when workers > 1.

    Args:
        spec: Shared round specification
        tasks: (run_index, run_seed, forced b or None) per round
        workers: Number of processes; 1 plays inline
        progress_callback: Optional callback(current, total, message)

    Returns:
        Results ordered by run index
    """
    total = len(tasks)
    if workers <= 1 or total <= 1:
        results = []
        for i, task in enumerate(tasks, start=1):
            results.append(play_round(spec, *task))
            if progress_callback and (i % 50 == 0 or i == total):
                progress_callback(i, total, f"Played {i}/{total} rounds")
        return sorted(results, key=lambda r: r.run_index)

    n_chunks = min(total, workers * 4)
    chunks = [list(c) for c in np.array_split(np.arange(total), n_chunks) if len(c)]
    results: List[RoundResult] = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_play_chunk, spec, [tasks[i] for i in chunk]) for chunk in chunks]
        for future in as_completed(futures):
            results.extend(future.result())
            if progress_callback:
                progress_callback(len(results), total, f"Played {len(results)}/{total} rounds")
    return sorted(results, key=lambda r: r.run_index)
