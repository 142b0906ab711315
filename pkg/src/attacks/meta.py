"""Shadow-model meta-classifier turning feature vectors into scores."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestClassifier

from src.attacks.base import FeatureVector

logger = logging.getLogger(__name__)

N_ESTIMATORS = 100


def stack_features(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into a matrix.

    Raises:
        ValueError: If the vectors differ in length
    """
    lengths = {len(v) for v in vectors}
    if len(lengths) > 1:
        raise ValueError(f"Feature vectors have mixed lengths {sorted(lengths)}")
    if not vectors:
        return np.zeros((0, 0))
    return np.vstack([v.values for v in vectors])


@dataclass
class MetaClassifier:
    """Random forest scoring how likely a run used the dataset with x_T."""
    model: RandomForestClassifier
    seed: int
    n_features: int

    def score_matrix(self, X: np.ndarray) -> np.ndarray:
        """Predicted probability of b = 1 for every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"Expected {self.n_features} features, got {X.shape[1]}")
        proba = self.model.predict_proba(X)
        return proba[:, list(self.model.classes_).index(1)]

    def score(self, features: FeatureVector) -> float:
        return float(self.score_matrix(features.values[None, :])[0])


def train_meta(
    features_b0: Sequence[FeatureVector],
    features_b1: Sequence[FeatureVector],
    seed: int,
    n_estimators: int = N_ESTIMATORS,
) -> MetaClassifier:
    """Fit the meta-classifier on shadow-run features of both worlds.

    Args:
        features_b0: Features of runs without x_T
        features_b1: Features of runs with x_T
        seed: Random state of the forest
        n_estimators: Number of trees

    Returns:
        Trained MetaClassifier

    Raises:
        ValueError: If a class is empty or feature lengths differ
    """
    if not features_b0 or not features_b1:
        raise ValueError("Meta-classifier needs shadow features from both worlds")
    X = stack_features(list(features_b0) + list(features_b1))
    y = np.concatenate([np.zeros(len(features_b0)), np.ones(len(features_b1))]).astype(int)

    model = RandomForestClassifier(n_estimators=n_estimators, random_state=int(seed) % (2 ** 32), n_jobs=1)
    model.fit(X, y)
    logger.info(f"Trained meta-classifier on {len(y)} shadow runs with {X.shape[1]} features")
    return MetaClassifier(model=model, seed=int(seed), n_features=X.shape[1])


def export_features(vectors: Sequence[FeatureVector], labels: Sequence[int],
                    path: Union[str, Path]) -> None:
    """Write a feature matrix with its world bits as CSV."""
    frame = pd.DataFrame(stack_features(vectors))
    frame.columns = [f"f{i}" for i in range(frame.shape[1])]
    frame.insert(0, "b", list(labels))
    frame.to_csv(path, index=False)
    logger.info(f"Exported {len(frame)} feature vectors to {path}")
