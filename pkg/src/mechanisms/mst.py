"""MST-like generator: Gaussian-noised marginals on a fixed tree of cliques.

The cliques are one- and two-way marginals whose pairs form a spanning tree
over the attributes. Each marginal has L2 sensitivity 1 under add/remove, so
k measurements with noise sigma compose to sqrt(k)/sigma-GDP.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.dataset import Dataset
from src.core.schema import Schema
from src.errors import SchemaError
from src.estimator import gdp_mu_of_eps
from src.mechanisms.base import make_rng, project_to_distribution, sample_categorical

logger = logging.getLogger(__name__)

Cliques = Tuple[Tuple[str, ...], ...]


@dataclass(frozen=True)
class NoisyMarginal:
    """Noisy contingency table over a clique, axes in clique order."""
    clique: Tuple[str, ...]
    noisy_counts: np.ndarray


@dataclass(frozen=True)
class MstModel:
    """Fitted marginal model."""
    schema: Schema
    cliques: Cliques
    marginals: Tuple[NoisyMarginal, ...]
    sigma: float
    epsilon: float
    delta: float
    seed: int

    def marginal(self, clique: Tuple[str, ...]) -> NoisyMarginal:
        for marginal in self.marginals:
            if marginal.clique == tuple(clique):
                return marginal
        raise KeyError(clique)


def default_cliques(schema: Schema) -> Cliques:
    """Chain of consecutive attribute pairs, or a single singleton."""
    names = schema.names
    if len(names) == 1:
        return ((names[0],),)
    return tuple((names[i], names[i + 1]) for i in range(len(names) - 1))


def validate_cliques(cliques: Sequence[Sequence[str]], schema: Schema) -> Cliques:
    """Check that the pair cliques form a spanning tree of the schema.

    Raises:
        SchemaError: On unknown attributes, cliques of the wrong size, a cycle,
            or attributes left disconnected
    """
    cliques = tuple(tuple(c) for c in cliques)
    if not cliques:
        raise SchemaError("At least one clique is required")
    parent = {name: name for name in schema.names}

    def find(name: str) -> str:
        while parent[name] != name:
            parent[name] = parent[parent[name]]
            name = parent[name]
        return name

    covered = set()
    for clique in cliques:
        if len(clique) not in (1, 2) or len(set(clique)) != len(clique):
            raise SchemaError(f"Clique {clique} must hold one or two distinct attributes")
        for name in clique:
            schema.index_of(name)
            covered.add(name)
        if len(clique) == 2:
            a, b = find(clique[0]), find(clique[1])
            if a == b:
                raise SchemaError(f"Clique {clique} closes a cycle")
            parent[a] = b

    if covered != set(schema.names):
        raise SchemaError(f"Attributes {sorted(set(schema.names) - covered)} are not measured")
    if len({find(name) for name in schema.names}) != 1:
        raise SchemaError("Cliques do not connect all attributes")
    return cliques


def sigma_for_budget(eps: float, delta: float, n_measurements: int) -> float:
    """Per-measurement Gaussian noise meeting (eps, delta) via GDP composition."""
    mu = gdp_mu_of_eps(eps, delta)
    return math.sqrt(n_measurements) / mu


def exact_marginal(codes: np.ndarray, schema: Schema, clique: Tuple[str, ...]) -> np.ndarray:
    columns = [schema.index_of(name) for name in clique]
    counts = np.zeros(tuple(schema.attributes[c].size for c in columns))
    if len(codes):
        np.add.at(counts, tuple(codes[:, c] for c in columns), 1.0)
    return counts


def mst_fit(
    d: Dataset,
    s: Schema,
    eps: float,
    delta: float,
    cliques: Optional[Sequence[Sequence[str]]] = None,
    seed: int = 0,
    noise_scale_factor: float = 1.0,
) -> MstModel:
    """Measure every clique marginal with Gaussian noise.

    Args:
        d: Training data, re-encoded into s if needed
        s: Schema the model is built on
        eps: Privacy budget
        delta: Privacy budget delta
        cliques: Measured cliques forming a tree; None means a chain
        seed: Seed of the noise
        noise_scale_factor: Multiplier on the calibrated noise scale

    Returns:
        MstModel holding the raw noisy tables

    Raises:
        ValueError: If eps is not positive or delta is outside (0, 1)
        SchemaError: If the cliques do not form a tree over the schema
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    cliques = validate_cliques(cliques or default_cliques(s), s)
    if d.schema != s:
        d = d.reencode(s)

    sigma = sigma_for_budget(eps, delta, len(cliques)) * noise_scale_factor
    rng = make_rng(seed)
    marginals = []
    for clique in cliques:
        exact = exact_marginal(d.codes, s, clique)
        noisy = exact + rng.normal(0.0, sigma, size=exact.shape)
        noisy.setflags(write=False)
        marginals.append(NoisyMarginal(clique, noisy))

    logger.debug(f"Measured {len(cliques)} marginals on {len(d)} rows with sigma {sigma:.4g}")
    return MstModel(
        schema=s,
        cliques=cliques,
        marginals=tuple(marginals),
        sigma=float(sigma),
        epsilon=float(eps),
        delta=float(delta),
        seed=int(seed),
    )


def _sampling_order(m: MstModel) -> Tuple[str, List[Tuple[str, str, np.ndarray]]]:
    """Root attribute and (parent, child, conditional) edges in BFS order."""
    edges: Dict[str, List[Tuple[str, np.ndarray]]] = {name: [] for name in m.schema.names}
    for marginal in m.marginals:
        if len(marginal.clique) == 2:
            a, b = marginal.clique
            joint = project_to_distribution(marginal.noisy_counts.ravel()).reshape(
                marginal.noisy_counts.shape)
            edges[a].append((b, joint))
            edges[b].append((a, joint.T))

    root = m.cliques[0][0]
    order = []
    visited = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for child, joint in edges[node]:
            if child not in visited:
                visited.add(child)
                order.append((node, child, project_to_distribution(joint, axis=1)))
                queue.append(child)
    return root, order


def _root_distribution(m: MstModel, root: str) -> np.ndarray:
    for marginal in m.marginals:
        if marginal.clique == (root,):
            return project_to_distribution(marginal.noisy_counts)
    for marginal in m.marginals:
        if root in marginal.clique:
            counts = np.maximum(marginal.noisy_counts, 0.0)
            other_axis = 1 - marginal.clique.index(root)
            return project_to_distribution(counts.sum(axis=other_axis))
    raise SchemaError(f"No marginal measures '{root}'")


def mst_sample(m: MstModel, n_out: int, seed: int) -> Dataset:
    """Sample the root from its marginal, then each child from its edge conditional."""
    if n_out < 0:
        raise ValueError("n_out must be non-negative")
    rng = make_rng(seed)
    codes = np.zeros((n_out, len(m.schema)), dtype=np.int64)

    root, order = _sampling_order(m)
    root_probs = _root_distribution(m, root)
    codes[:, m.schema.index_of(root)] = sample_categorical(
        rng, np.broadcast_to(root_probs, (n_out, root_probs.size)))

    for parent, child, conditional in order:
        parent_codes = codes[:, m.schema.index_of(parent)]
        codes[:, m.schema.index_of(child)] = sample_categorical(rng, conditional[parent_codes])
    return Dataset.from_codes(m.schema, codes)
