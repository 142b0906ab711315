"""Unit tests for the MST-like generator."""
import math

import numpy as np
import pytest

from src.core.dataset import Dataset
from src.errors import SchemaError
from src.estimator import gdp_mu_of_eps
from src.mechanisms.mst import (
    MstModel,
    NoisyMarginal,
    default_cliques,
    exact_marginal,
    mst_fit,
    mst_sample,
    sigma_for_budget,
    validate_cliques,
)


class TestCliques:
    """Test clique validation."""

    def test_default_chain(self, small_schema):
        """Test the default chain of pairs."""
        assert default_cliques(small_schema) == (("a", "b"), ("b", "c"))

    def test_cycle_rejected(self, small_schema):
        """Test that a cycle of pairs is rejected."""
        with pytest.raises(SchemaError):
            validate_cliques([("a", "b"), ("b", "c"), ("c", "a")], small_schema)

    def test_disconnected_rejected(self, small_schema):
        """Test that an unmeasured attribute is rejected."""
        with pytest.raises(SchemaError):
            validate_cliques([("a", "b")], small_schema)

    def test_singleton_allowed(self, small_schema):
        """Test that a singleton clique may sit next to the tree."""
        cliques = validate_cliques([("a",), ("a", "b"), ("b", "c")], small_schema)
        assert len(cliques) == 3

    def test_three_way_rejected(self, small_schema):
        """Test that cliques larger than pairs are rejected."""
        with pytest.raises(SchemaError):
            validate_cliques([("a", "b", "c")], small_schema)


class TestSigma:
    """Test noise calibration."""

    def test_unit_mu(self):
        """Test that one measurement gets sigma = 1 / mu."""
        eps = 1.0
        delta = 1e-5
        mu = gdp_mu_of_eps(eps, delta)
        assert sigma_for_budget(eps, delta, 1) * mu == pytest.approx(1.0)

    def test_four_measurements(self):
        """Test that four measurements at eps = 1, delta = 1e-5 get sigma = 2 / mu."""
        mu = gdp_mu_of_eps(1.0, 1e-5)
        assert 0.2 < mu < 0.35
        assert sigma_for_budget(1.0, 1e-5, 4) == pytest.approx(2.0 / mu)


class TestMstFit:
    """Test measuring noisy marginals."""

    def test_huge_budget_is_exact(self, small_dataset):
        """Test that eps = 1e6 leaves the marginals at their counts."""
        model = mst_fit(small_dataset, small_dataset.schema, 1e6, 1e-5, seed=0)
        assert model.sigma < 2e-3
        for marginal in model.marginals:
            exact = exact_marginal(small_dataset.codes, small_dataset.schema, marginal.clique)
            np.testing.assert_allclose(marginal.noisy_counts, exact, atol=0.02)

    def test_deterministic(self, small_dataset):
        """Test that the same seed gives identical measurements."""
        first = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, seed=8)
        second = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, seed=8)
        for m1, m2 in zip(first.marginals, second.marginals):
            np.testing.assert_array_equal(m1.noisy_counts, m2.noisy_counts)

    def test_noise_scale_factor(self, small_dataset):
        """Test that the factor scales sigma."""
        base = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5)
        halved = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, noise_scale_factor=0.5)
        assert halved.sigma == pytest.approx(base.sigma / 2)

    def test_invalid_budget(self, small_dataset):
        """Test that eps must be positive."""
        with pytest.raises(ValueError):
            mst_fit(small_dataset, small_dataset.schema, 0.0, 1e-5)

    def test_cyclic_cliques(self, small_dataset):
        """Test that fitting with cyclic cliques fails."""
        with pytest.raises(SchemaError):
            mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5,
                    cliques=[("a", "b"), ("b", "c"), ("a", "c")])


class TestMstSample:
    """Test sampling from the marginal tree."""

    def test_zero_rows(self, small_dataset):
        """Test that n_out = 0 gives an empty dataset."""
        model = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5)
        assert len(mst_sample(model, 0, seed=0)) == 0

    def test_same_seed_same_output(self, small_dataset):
        """Test that sampling is deterministic in its seed."""
        model = mst_fit(small_dataset, small_dataset.schema, 1.0, 1e-5)
        assert mst_sample(model, 40, seed=2).rows == mst_sample(model, 40, seed=2).rows

    def test_pairwise_marginals_converge(self, small_dataset):
        """Test that a zero-noise model reproduces its pair marginals."""
        schema = small_dataset.schema
        marginals = tuple(
            NoisyMarginal(clique, exact_marginal(small_dataset.codes, schema, clique))
            for clique in default_cliques(schema)
        )
        model = MstModel(schema, default_cliques(schema), marginals, 0.0, math.inf, 1e-5, 0)
        synth = mst_sample(model, 100_000, seed=5)
        for marginal in marginals:
            target = marginal.noisy_counts / marginal.noisy_counts.sum()
            observed = exact_marginal(synth.codes, schema, marginal.clique) / len(synth)
            assert 0.5 * np.abs(observed - target).sum() < 0.01

    def test_samples_are_valid(self, small_dataset):
        """Test that every sampled row is valid under the schema."""
        model = mst_fit(small_dataset, small_dataset.schema, 0.1, 1e-5, seed=1)
        synth = mst_sample(model, 200, seed=1)
        assert isinstance(synth, Dataset)
        for row in synth.rows:
            row.validate(small_dataset.schema)
