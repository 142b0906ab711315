"""Membership-inference attacks scoring one run of the distinguishing game."""

from src.attacks.base import AttackKind, FeatureVector, check_compatible
from src.attacks.blackbox import dcr_score, qb_features
from src.attacks.canary import CanaryObserver, CanaryPlacement, CanarySpec, canary_attack
from src.attacks.meta import MetaClassifier, train_meta
from src.attacks.whitebox import WhiteboxVariant, logan_score, wb_features

__all__ = [
    "AttackKind",
    "FeatureVector",
    "check_compatible",
    "dcr_score",
    "qb_features",
    "CanaryObserver",
    "CanaryPlacement",
    "CanarySpec",
    "canary_attack",
    "MetaClassifier",
    "train_meta",
    "WhiteboxVariant",
    "logan_score",
    "wb_features",
]
