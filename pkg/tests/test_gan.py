"""Unit tests for the DP-WGAN generator."""
import math
from unittest.mock import patch

import numpy as np
import pytest

from src.config import Config
from src.core.dataset import Dataset
from src.core.schema import Record
from src.errors import BudgetUnsatisfiableError
from src.mechanisms.base import GanHyper
from src.mechanisms.gan import (
    clip_per_example,
    critic_forward,
    critic_param_dim,
    critic_per_example_gradients,
    gan_fit,
    gan_sample,
    noise_multiplier,
    planned_iterations,
)

FAST = GanHyper(iterations=4, n_critic=2, batch_size=2)


class RecordingObserver:
    """Observer that leaves gradients alone and counts calls."""

    def __init__(self):
        self.started = None
        self.batches = 0
        self.steps = 0

    def on_fit_start(self, schema, param_dim):
        self.started = (schema, param_dim)

    def on_critic_gradients(self, batch_codes, per_example):
        self.batches += 1
        return per_example

    def on_critic_step(self, w_start, w_after):
        self.steps += 1


class TestCriticGradients:
    """Test the explicit backpropagation through the critic."""

    def test_param_dim(self):
        """Test the flattened critic size."""
        assert critic_param_dim(7, 16) == 16 * 7 + 2 * 16 + 1

    def test_gradients_match_finite_differences(self):
        """Test per-example gradients against central differences."""
        rng = np.random.default_rng(0)
        hidden = 4
        w = rng.normal(0, 0.5, critic_param_dim(5, hidden))
        X = rng.random((3, 5))
        analytic = critic_per_example_gradients(w, X, hidden)
        numeric = np.zeros_like(analytic)
        for p in range(w.size):
            step = np.zeros_like(w)
            step[p] = 1e-6
            numeric[:, p] = (critic_forward(w + step, X, hidden) - critic_forward(w - step, X, hidden)) / 2e-6
        np.testing.assert_allclose(analytic, numeric, atol=1e-6)

    def test_clipping(self):
        """Test that rows are scaled down to the bound and short rows are kept."""
        gradients = np.array([[3.0, 4.0], [0.3, 0.4]])
        clipped = clip_per_example(gradients, 1.0)
        np.testing.assert_allclose(clipped[0], [0.6, 0.8])
        np.testing.assert_allclose(clipped[1], [0.3, 0.4])


class TestNoiseCalibration:
    """Test noise multiplier and iteration planning."""

    def test_accountant_matches_target(self):
        """Test that sqrt(T * n_critic) / sigma equals the target mu."""
        hyper = GanHyper(iterations=10, n_critic=5)
        sigma, target_mu = noise_multiplier(1.0, 1e-5, hyper)
        assert math.sqrt(50) / sigma == pytest.approx(target_mu)

    def test_cap_exceeded(self):
        """Test that a budget needing too much noise is refused."""
        with patch.object(Config, "GAN_SIGMA_CAP", 1.0):
            with pytest.raises(BudgetUnsatisfiableError):
                noise_multiplier(0.1, 1e-5, GanHyper())

    def test_data_dependent_iterations(self):
        """Test that neighboring sizes plan different iteration counts."""
        hyper = GanHyper(iterations=10, batch_size=2, max_iterations=500)
        assert planned_iterations(2, hyper, False) == planned_iterations(3, hyper, False) == 10
        assert planned_iterations(2, hyper, True) == 10
        assert planned_iterations(3, hyper, True) == 23

    def test_iteration_cap(self):
        """Test that the data-dependent count respects max_iterations."""
        hyper = GanHyper(iterations=10, batch_size=2, max_iterations=40)
        assert planned_iterations(100, hyper, True) == 40


class TestGanFit:
    """Test DP-WGAN training."""

    def test_accountant_with_fixed_sigma(self, small_dataset):
        """Test T = 10, n_critic = 5 with sigma = sqrt(50) reports mu = 1."""
        hyper = GanHyper(iterations=10, n_critic=5, test_mode=True, sigma_override=math.sqrt(50))
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, hyper, seed=0)
        assert model.critic_steps_run == 50
        assert model.accountant_mu == pytest.approx(1.0)

    def test_accountant_meets_budget(self, small_dataset):
        """Test that a normal fit spends exactly its budget."""
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST, seed=1)
        assert model.iterations_run == FAST.iterations
        assert model.accountant_mu == pytest.approx(model.target_mu)

    def test_deterministic(self, small_dataset):
        """Test that the same seed gives identical parameters."""
        first = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST, seed=3)
        second = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST, seed=3)
        np.testing.assert_array_equal(first.critic_params, second.critic_params)
        np.testing.assert_array_equal(first.generator_params, second.generator_params)

    def test_transcript_and_weight_clip(self, small_dataset):
        """Test that every critic step is recorded and stays clipped."""
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST, seed=2)
        assert len(model.transcript) == FAST.critic_steps
        for step in model.transcript:
            assert np.abs(step.w_after).max() <= FAST.weight_clip

    def test_observer_sees_every_step(self, small_dataset):
        """Test the training hook protocol."""
        observer = RecordingObserver()
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST, seed=0, observer=observer)
        assert observer.started == (small_dataset.schema, model.param_dim)
        assert observer.batches == observer.steps == FAST.critic_steps

    def test_canary_gradient_moves_critic(self, small_schema):
        """Test that a Dirac gradient moves its parameter by alpha * c_p^2 per step."""
        d = Dataset.from_records(small_schema, [Record((1, 1, 2))])
        hyper = GanHyper(iterations=1, n_critic=5, batch_size=1, learning_rate=0.1, weight_clip=1.0,
                         test_mode=True, sigma_override=0.0, zero_fake_gradients=True)
        canary = np.zeros(critic_param_dim(small_schema.one_hot_dim, hyper.hidden_dim))
        canary[-1] = hyper.grad_bound

        class Canary(RecordingObserver):
            def on_critic_gradients(self, batch_codes, per_example):
                return np.tile(canary, (len(per_example), 1))

        model = gan_fit(d, small_schema, 1.0, 1e-5, hyper, seed=0, observer=Canary())
        projections = [np.dot(s.w_after - s.w_start, canary) for s in model.transcript]
        np.testing.assert_allclose(projections, 0.1)

    def test_batch_larger_than_data(self, small_schema):
        """Test that L > |d| is rejected."""
        d = Dataset.from_records(small_schema, [Record((0, 0, 0))])
        with pytest.raises(ValueError):
            gan_fit(d, small_schema, 1.0, 1e-5, GanHyper(batch_size=2))

    def test_data_dependent_stop_changes_length(self, small_schema):
        """Test that neighboring datasets train for different lengths."""
        hyper = GanHyper(iterations=2, n_critic=1, batch_size=2, max_iterations=50)
        d0 = Dataset.from_records(small_schema, [Record((0, 0, 0))] * 2)
        d1 = d0.add(Record((1, 1, 2)))
        m0 = gan_fit(d0, small_schema, 1.0, 1e-5, hyper, data_dependent_stop=True)
        m1 = gan_fit(d1, small_schema, 1.0, 1e-5, hyper, data_dependent_stop=True)
        assert m0.iterations_run == 2
        assert m1.iterations_run == 5
        assert len(m0.transcript) != len(m1.transcript)


class TestGanSample:
    """Test sampling from the generator."""

    def test_zero_rows(self, small_dataset):
        """Test that n_out = 0 gives an empty dataset."""
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST)
        assert len(gan_sample(model, 0, seed=0)) == 0

    def test_same_seed_same_output(self, small_dataset):
        """Test that sampling is deterministic and schema-valid."""
        model = gan_fit(small_dataset, small_dataset.schema, 1.0, 1e-5, FAST)
        first = gan_sample(model, 30, seed=4)
        assert first.rows == gan_sample(model, 30, seed=4).rows
        for row in first.rows:
            row.validate(small_dataset.schema)
