"""Differentially private synthetic-data generators audited by the game.

Three families (a PrivBayes-like Bayesian network, an MST-like marginal
model and a DP-WGAN) plus a layer that plants known privacy bugs.
"""

from src.mechanisms.base import GanHyper, MechanismConfig, MechanismFamily
from src.mechanisms.bugs import BugKind, BugSpec, inject_bug
from src.mechanisms.gan import GanModel, TrainingObserver, gan_fit, gan_sample
from src.mechanisms.mst import MstModel, mst_fit, mst_sample
from src.mechanisms.pipeline import GenModel, fit_model, sample_model
from src.mechanisms.privbayes import PbModel, pb_fit, pb_sample
from src.mechanisms.serialization import load_model, save_model

__all__ = [
    "GanHyper",
    "MechanismConfig",
    "MechanismFamily",
    "BugKind",
    "BugSpec",
    "inject_bug",
    "GanModel",
    "TrainingObserver",
    "gan_fit",
    "gan_sample",
    "MstModel",
    "mst_fit",
    "mst_sample",
    "GenModel",
    "fit_model",
    "sample_model",
    "PbModel",
    "pb_fit",
    "pb_sample",
    "load_model",
    "save_model",
]
