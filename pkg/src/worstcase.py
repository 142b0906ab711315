"""Worst-case neighboring datasets and vulnerable target records.

Worst-case pairs are crafted from the schema: few rows (small), few
columns (narrow), and the target already present once (repeat). On real
data, the most vulnerable target is chosen in two stages: a rarity ranking
shortlists candidates, then mini membership attacks measure each
candidate's AUC.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import roc_auc_score

from src.attacks.base import AttackKind, FeatureVector
from src.attacks.meta import train_meta
from src.core.dataset import Dataset, NeighborVariant, make_neighbors
from src.core.schema import Record, Schema
from src.errors import DegeneratePairError, SchemaError
from src.game.rounds import ProgressCallback, RoundSpec, derive_run_seed, play_rounds
from src.mechanisms.base import MechanismConfig, make_rng

logger = logging.getLogger(__name__)

NARROW_ATTRIBUTES = 3


@dataclass(frozen=True)
class WorstCaseKind:
    """Properties of a crafted neighboring pair.

    Attributes:
        small: Base dataset holds only min_rows records
        narrow: Schema cut to its first three attributes
        repeat: x_T is already in the base dataset
    """
    small: bool = True
    narrow: bool = False
    repeat: bool = False

    @property
    def label(self) -> str:
        parts = [name for name in ("small", "narrow", "repeat") if getattr(self, name)]
        return "+".join(parts) or "none"

    @classmethod
    def parse(cls, label: str) -> "WorstCaseKind":
        """Parse labels such as "small+narrow"."""
        parts = {p.strip() for p in label.split("+") if p.strip() and p.strip() != "none"}
        unknown = parts - {"small", "narrow", "repeat"}
        if unknown:
            raise ValueError(f"Unknown worst-case properties {sorted(unknown)}")
        return cls(small="small" in parts, narrow="narrow" in parts, repeat="repeat" in parts)


def _ranked_categories(schema: Schema, reference: Optional[Dataset], rng: np.random.Generator) -> List[np.ndarray]:
    """Per attribute, category indices from most to least frequent.

    Without reference data the first category counts as most frequent and
    the last as rarest. Ties in the reference are broken by rng.
    """
    ranking = []
    for j, attr in enumerate(schema.attributes):
        if reference is None or len(reference) == 0:
            ranking.append(np.arange(attr.size))
            continue
        counts = np.bincount(reference.codes[:, j], minlength=attr.size)
        jitter = rng.permutation(attr.size)
        ranking.append(np.lexsort((jitter, -counts)))
    return ranking


def modal_record(d: Dataset, seed: int = 0) -> Record:
    """Record made of the most frequent category of every attribute."""
    ranking = _ranked_categories(d.schema, d, make_rng(seed))
    return Record(tuple(int(r[0]) for r in ranking))


def craft_worstcase(
    s: Schema,
    kind: WorstCaseKind,
    variant: NeighborVariant,
    seed: int = 0,
    reference: Optional[Dataset] = None,
    min_rows: int = 2,
) -> Tuple[Dataset, Record, Optional[Record]]:
    """Build the base dataset and target record(s) of a worst-case pair.

    Args:
        s: Declared schema
        kind: Worst-case properties
        variant: Neighboring relation; EDIT also returns y
        seed: Breaks frequency ties in the reference data
        reference: Real data; supplies category frequencies and, when the
            pair is not small, the base rows
        min_rows: Size of a small base dataset

    Returns:
        (d_minus, x_T, y) with y None for ADD_REMOVE. x_T takes the rarest
        category of every attribute and fillers and y the most frequent,
        so fillers sit as far from x_T as one-hot space allows.

    Raises:
        SchemaError: If narrow is requested on fewer than three attributes
        ValueError: If a non-small pair has no reference data
        DegeneratePairError: If y would equal x_T under EDIT
    """
    variant = NeighborVariant(variant)
    if min_rows < 1:
        raise ValueError("min_rows must be at least 1")
    schema = s
    if kind.narrow:
        if len(s) < NARROW_ATTRIBUTES:
            raise SchemaError(f"Narrow pairs need at least {NARROW_ATTRIBUTES} attributes, got {len(s)}")
        schema = s.truncate(NARROW_ATTRIBUTES)
    if reference is not None:
        reference = Dataset.from_frame(reference.to_frame(), schema)

    ranking = _ranked_categories(schema, reference, make_rng(seed))
    x_T = Record(tuple(int(r[-1]) for r in ranking))
    modal = Record(tuple(int(r[0]) for r in ranking))

    y = None
    if variant == NeighborVariant.EDIT:
        if modal == x_T:
            raise DegeneratePairError("Most frequent and rarest records coincide; no edit pair exists")
        y = modal

    if kind.small:
        fillers = [modal] * (min_rows - 1 if kind.repeat else min_rows)
        rows = fillers + ([x_T] if kind.repeat else [])
    else:
        if reference is None:
            raise ValueError("A pair that is not small needs reference data")
        rows = [r for r in reference.rows if r != x_T]
        if kind.repeat:
            rows.append(x_T)

    d_minus = Dataset(schema, tuple(rows))
    logger.info(
        f"Crafted {kind.label} pair: |D-|={len(d_minus)}, {len(schema)} attributes, "
        f"x_T={x_T.labels(schema)}"
    )
    return d_minus, x_T, y


def rarity_scores(d: Dataset) -> np.ndarray:
    """Sum over attributes of -log empirical frequency of each row's value."""
    if len(d) == 0:
        return np.zeros(0)
    scores = np.zeros(len(d))
    for j in range(len(d.schema)):
        counts = np.bincount(d.codes[:, j], minlength=d.schema.attributes[j].size)
        scores += -np.log(counts[d.codes[:, j]] / len(d))
    return scores


def rank_vulnerable(d: Dataset, V: int = 100) -> pd.DataFrame:
    """Shortlist the V rarest distinct records.

    Returns:
        DataFrame with row (first occurrence), rarity and one column per
        attribute, most vulnerable first
    """
    if V < 1:
        raise ValueError("V must be at least 1")
    scores = rarity_scores(d)
    seen = {}
    for i, row in enumerate(d.rows):
        seen.setdefault(row, i)
    first_rows = np.array(sorted(seen.values()), dtype=np.int64)
    order = first_rows[np.argsort(-scores[first_rows], kind="stable")][:V]

    frame = d.to_frame().iloc[order].reset_index(drop=True)
    frame.insert(0, "rarity", scores[order])
    frame.insert(0, "row", order)
    return frame


def _mini_mia_auc(
    d: Dataset,
    x: Record,
    mech_config: MechanismConfig,
    attack: AttackKind,
    variant: NeighborVariant,
    reps: int,
    seed: int,
    synth_size: int,
    workers: int,
) -> float:
    y = None
    d_minus = d.remove_one(x)
    if variant == NeighborVariant.EDIT:
        y = modal_record(d, seed)
        if y == x:
            return float("nan")
    pair = make_neighbors(d_minus, x, variant, y)
    spec = RoundSpec(mechanism=mech_config, attack=attack, pair=pair,
                     synth_size=synth_size, query_seed=seed)

    half = reps // 2
    tasks = [(i, derive_run_seed(seed, i), int(i >= half)) for i in range(2 * half)]
    results = play_rounds(spec, tasks, workers=workers)
    labels = np.array([r.b for r in results])

    if attack.needs_meta:
        # two-fold cross-fitting: even runs score odd runs and vice versa
        scores = np.zeros(len(results))
        parity = np.arange(len(results)) % 2
        for fold in (0, 1):
            train = [r for r, p in zip(results, parity) if p != fold]
            meta = train_meta(
                [FeatureVector(r.features, attack) for r in train if r.b == 0],
                [FeatureVector(r.features, attack) for r in train if r.b == 1],
                seed,
            )
            test_idx = np.flatnonzero(parity == fold)
            scores[test_idx] = meta.score_matrix(np.vstack([results[i].features for i in test_idx]))
    else:
        scores = np.array([r.score for r in results])
    return float(roc_auc_score(labels, scores))


def vulnerability_table(
    d: Dataset,
    mech_config: MechanismConfig,
    attack: AttackKind,
    V: int = 100,
    reps: int = 64,
    seed: int = 0,
    variant: NeighborVariant = NeighborVariant.ADD_REMOVE,
    synth_size: int = 100,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> pd.DataFrame:
    """Rarity shortlist with the mini-MIA AUC of every candidate.

    Raises:
        ValueError: If V is 0 or exceeds |d|, or reps < 2 or odd
    """
    if V < 1 or V > len(d):
        raise ValueError(f"V must be in [1, {len(d)}], got {V}")
    if reps < 2 or reps % 2:
        raise ValueError(f"reps must be an even number >= 2, got {reps}")
    attack = AttackKind(attack)
    if attack.needs_meta and reps < 4:
        raise ValueError("Cross-fitted meta-classifier attacks need reps >= 4")
    variant = NeighborVariant(variant)

    table = rank_vulnerable(d, V)
    aucs = []
    for i, row in enumerate(table["row"]):
        candidate = d.rows[int(row)]
        aucs.append(_mini_mia_auc(d, candidate, mech_config, attack, variant, reps,
                                  derive_run_seed(seed, i), synth_size, workers))
        if progress_callback:
            progress_callback(i + 1, len(table), f"Mini-MIA {i + 1}/{len(table)}: AUC {aucs[-1]:.3f}")
    table["auc"] = aucs
    return table


def select_vulnerable(
    d: Dataset,
    mech_config: MechanismConfig,
    attack: AttackKind,
    V: int = 100,
    reps: int = 64,
    seed: int = 0,
    variant: NeighborVariant = NeighborVariant.ADD_REMOVE,
    synth_size: int = 100,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> Record:
    """The candidate record on which the mini-MIAs reach the highest AUC.

    Ties go to the candidate ranked rarer.
    """
    table = vulnerability_table(d, mech_config, attack, V, reps, seed, variant,
                                synth_size, workers, progress_callback)
    aucs = table["auc"].fillna(-1.0).to_numpy()
    best = int(table["row"].iloc[int(np.argmax(aucs))])
    logger.info(f"Selected vulnerable record at row {best} with AUC {aucs.max():.3f}")
    return d.rows[best]
