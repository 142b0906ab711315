"""JSON save/load for fitted models.

Arrays are stored as {"shape": [...], "data": [...]} so audits can be
resumed from persisted models.
"""

import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from src.core.schema import Schema
from src.errors import SchemaError
from src.mechanisms.base import GanHyper
from src.mechanisms.gan import CriticStep, GanModel
from src.mechanisms.mst import MstModel, NoisyMarginal
from src.mechanisms.pipeline import GenModel
from src.mechanisms.privbayes import ConditionalTable, PbModel

logger = logging.getLogger(__name__)


def _array_to_json(array: np.ndarray) -> Dict[str, Any]:
    array = np.asarray(array, dtype=float)
    return {"shape": list(array.shape), "data": array.ravel().tolist()}


def _array_from_json(payload: Dict[str, Any]) -> np.ndarray:
    array = np.asarray(payload["data"], dtype=float).reshape(payload["shape"])
    array.setflags(write=False)
    return array


def model_to_dict(model: GenModel) -> Dict[str, Any]:
    """Plain-JSON representation of a fitted model."""
    base = {"schema": model.schema.to_dict(), "seed": model.seed, "epsilon": model.epsilon}
    if isinstance(model, PbModel):
        return {
            **base,
            "family": "privbayes",
            "noise_scale": model.noise_scale,
            "structure": [[attr, list(parents)] for attr, parents in model.structure],
            "tables": [
                {
                    "attribute": t.attribute,
                    "parents": list(t.parents),
                    "noisy_counts": _array_to_json(t.noisy_counts),
                    "probabilities": _array_to_json(t.probabilities),
                    "measured": t.measured,
                }
                for t in model.tables
            ],
        }
    if isinstance(model, MstModel):
        return {
            **base,
            "family": "mst",
            "delta": model.delta,
            "sigma": model.sigma,
            "cliques": [list(c) for c in model.cliques],
            "marginals": [
                {"clique": list(m.clique), "noisy_counts": _array_to_json(m.noisy_counts)}
                for m in model.marginals
            ],
        }
    return {
        **base,
        "family": "gan",
        "delta": model.delta,
        "hyper": dataclasses.asdict(model.hyper),
        "critic_params": _array_to_json(model.critic_params),
        "generator_params": _array_to_json(model.generator_params),
        "transcript": [
            {"iteration": s.iteration, "w_start": _array_to_json(s.w_start),
             "w_after": _array_to_json(s.w_after)}
            for s in model.transcript
        ],
        "sigma": model.sigma,
        "accountant_mu": model.accountant_mu,
        "target_mu": model.target_mu,
        "iterations_run": model.iterations_run,
        "critic_steps_run": model.critic_steps_run,
    }


def model_from_dict(data: Dict[str, Any]) -> GenModel:
    """Rebuild a model from model_to_dict output.

    Raises:
        SchemaError: If the document is malformed or names an unknown family
    """
    try:
        schema = Schema.from_dict(data["schema"])
        family = data["family"]
        if family == "privbayes":
            return PbModel(
                schema=schema,
                structure=tuple((a, tuple(p)) for a, p in data["structure"]),
                tables=tuple(
                    ConditionalTable(
                        t["attribute"], tuple(t["parents"]),
                        _array_from_json(t["noisy_counts"]),
                        _array_from_json(t["probabilities"]),
                        measured=t.get("measured", True),
                    )
                    for t in data["tables"]
                ),
                epsilon=data["epsilon"],
                noise_scale=data["noise_scale"],
                seed=data["seed"],
            )
        if family == "mst":
            return MstModel(
                schema=schema,
                cliques=tuple(tuple(c) for c in data["cliques"]),
                marginals=tuple(
                    NoisyMarginal(tuple(m["clique"]), _array_from_json(m["noisy_counts"]))
                    for m in data["marginals"]
                ),
                sigma=data["sigma"],
                epsilon=data["epsilon"],
                delta=data["delta"],
                seed=data["seed"],
            )
        if family == "gan":
            return GanModel(
                schema=schema,
                hyper=GanHyper(**data["hyper"]),
                critic_params=_array_from_json(data["critic_params"]),
                generator_params=_array_from_json(data["generator_params"]),
                transcript=tuple(
                    CriticStep(s["iteration"], _array_from_json(s["w_start"]),
                               _array_from_json(s["w_after"]))
                    for s in data["transcript"]
                ),
                sigma=data["sigma"],
                accountant_mu=data["accountant_mu"],
                target_mu=data["target_mu"],
                iterations_run=data["iterations_run"],
                critic_steps_run=data["critic_steps_run"],
                epsilon=data["epsilon"],
                delta=data["delta"],
                seed=data["seed"],
            )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"Malformed model document: {e}") from e
    raise SchemaError(f"Unknown model family '{family}'")


def save_model(model: GenModel, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model)))
    logger.debug(f"Saved model to {path}")


def load_model(path: Union[str, Path]) -> GenModel:
    return model_from_dict(json.loads(Path(path).read_text()))
