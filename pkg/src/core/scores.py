"""Labeled attack scores produced by the distinguishing game."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

FOLD_COLUMN_PREFIX = "fold_score_"


class Split(str, Enum):
    """Role of a run in the audit."""
    SHADOW = "shadow"
    THRESHOLD = "threshold"
    TEST = "test"


@dataclass(frozen=True)
class ScoreSet:
    """Per-run world bits and attack scores.

    Attributes:
        labels: World bit b of each run (1 = target present)
        scores: Attack score of each run
        run_seeds: Seed each run was played with
        splits: Split tag of each run
        run_index: Position of each run in the game
        fold_scores: For meta-classifier attacks, one column per
            cross-validation fold with the scores of that fold's classifier;
            NaN where the run trained it
    """
    labels: np.ndarray
    scores: np.ndarray
    run_seeds: np.ndarray
    splits: np.ndarray
    run_index: np.ndarray
    fold_scores: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.labels)
        for name in ("scores", "run_seeds", "splits", "run_index"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"ScoreSet column '{name}' has the wrong length")
        if self.fold_scores is not None and (self.fold_scores.ndim != 2 or len(self.fold_scores) != n):
            raise ValueError("fold_scores must hold one row per run")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("Labels must be 0 or 1")

    @classmethod
    def from_arrays(cls, labels, scores, run_seeds=None, splits=None, run_index=None,
                    fold_scores=None) -> "ScoreSet":
        labels = np.asarray(labels, dtype=np.int64)
        n = len(labels)
        return cls(
            labels=labels,
            scores=np.asarray(scores, dtype=float),
            run_seeds=np.asarray(run_seeds if run_seeds is not None else np.zeros(n), dtype=np.uint64),
            splits=np.asarray(splits if splits is not None else [Split.TEST.value] * n, dtype=object),
            run_index=np.asarray(run_index if run_index is not None else np.arange(n), dtype=np.int64),
            fold_scores=None if fold_scores is None else np.asarray(fold_scores, dtype=float).reshape(n, -1),
        )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n0(self) -> int:
        return int(np.sum(self.labels == 0))

    @property
    def n1(self) -> int:
        return int(np.sum(self.labels == 1))

    def select(self, mask: np.ndarray) -> "ScoreSet":
        return ScoreSet(
            labels=self.labels[mask],
            scores=self.scores[mask],
            run_seeds=self.run_seeds[mask],
            splits=self.splits[mask],
            run_index=self.run_index[mask],
            fold_scores=None if self.fold_scores is None else self.fold_scores[mask],
        )

    def with_scores(self, scores: np.ndarray) -> "ScoreSet":
        """Same runs scored differently, without fold scores."""
        return ScoreSet(self.labels, np.asarray(scores, dtype=float), self.run_seeds, self.splits, self.run_index)

    def subset(self, split: Union[Split, str]) -> "ScoreSet":
        """Entries tagged with one split."""
        return self.select(self.splits == Split(split).value)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "run_index": self.run_index,
            "b": self.labels,
            "score": self.scores,
            "split": self.splits.astype(str),
            "run_seed": self.run_seeds,
        })
        if self.fold_scores is not None:
            for fold in range(self.fold_scores.shape[1]):
                frame[f"{FOLD_COLUMN_PREFIX}{fold}"] = self.fold_scores[:, fold]
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ScoreSet":
        fold_columns = sorted((c for c in frame.columns if str(c).startswith(FOLD_COLUMN_PREFIX)),
                              key=lambda c: int(str(c)[len(FOLD_COLUMN_PREFIX):]))
        return cls.from_arrays(
            labels=frame["b"].to_numpy(),
            scores=frame["score"].to_numpy(),
            run_seeds=frame["run_seed"].to_numpy(),
            splits=frame["split"].astype(str).to_numpy(),
            run_index=frame["run_index"].to_numpy(),
            fold_scores=frame[fold_columns].to_numpy(dtype=float) if fold_columns else None,
        )

    def save_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def load_csv(cls, path: Union[str, Path]) -> "ScoreSet":
        frame = pd.read_csv(path, dtype={"run_seed": np.uint64}, float_precision="round_trip")
        return cls.from_frame(frame)
