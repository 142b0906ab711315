"""Family-independent fit and sample entry points.

This is where a MechanismConfig's planted bugs take effect: the metadata
bug swaps the schema, the PRNG bug swaps the seeds, and the remaining
switches are forwarded to the family's fit function.
"""

import logging
from typing import Optional, Union

from src.core.dataset import Dataset
from src.core.schema import Schema, infer_metadata
from src.errors import IncompatibleAttackError
from src.mechanisms.base import MechanismConfig, MechanismFamily
from src.mechanisms.gan import GanModel, TrainingObserver, gan_fit, gan_sample
from src.mechanisms.mst import MstModel, mst_fit, mst_sample
from src.mechanisms.privbayes import PbModel, pb_fit, pb_sample

logger = logging.getLogger(__name__)

GenModel = Union[PbModel, MstModel, GanModel]


def fit_model(
    cfg: MechanismConfig,
    d: Dataset,
    schema: Schema,
    seed: int,
    observer: Optional[TrainingObserver] = None,
) -> GenModel:
    """Fit the configured generator on d.

    Args:
        cfg: Mechanism configuration, possibly with a planted bug
        d: Training data
        schema: Declared schema of the data
        seed: Fit seed
        observer: Training hook, GAN only

    Raises:
        IncompatibleAttackError: If an observer is given for a non-GAN family
    """
    if observer is not None and cfg.family != MechanismFamily.GAN:
        raise IncompatibleAttackError("Only the GAN exposes a training hook")

    if cfg.infer_metadata:
        schema = infer_metadata(d.to_frame())
    if d.schema != schema:
        d = d.reencode(schema)
    if cfg.seed_override is not None:
        seed = cfg.seed_override

    if cfg.family == MechanismFamily.PRIVBAYES:
        return pb_fit(d, schema, cfg.epsilon, cfg.structure, seed,
                      noise_scale_factor=cfg.noise_scale_factor)
    if cfg.family == MechanismFamily.MST:
        return mst_fit(d, schema, cfg.epsilon, cfg.delta, cfg.cliques, seed,
                       noise_scale_factor=cfg.noise_scale_factor)
    return gan_fit(d, schema, cfg.epsilon, cfg.delta, cfg.gan, seed,
                   observer=observer,
                   noise_scale_factor=cfg.noise_scale_factor,
                   data_dependent_stop=cfg.data_dependent_stop)


def sample_model(cfg: MechanismConfig, model: GenModel, n_out: int, seed: int) -> Dataset:
    """Draw n_out synthetic rows in the model's own schema."""
    if cfg.seed_override is not None:
        seed = cfg.seed_override
    if isinstance(model, PbModel):
        return pb_sample(model, n_out, seed)
    if isinstance(model, MstModel):
        return mst_sample(model, n_out, seed)
    return gan_sample(model, n_out, seed)
