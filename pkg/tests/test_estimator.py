"""Unit tests for the epsilon estimator."""
import math

import numpy as np
import pytest
from scipy import stats

from src.core.scores import ScoreSet
from src.estimator import (
    AuditMethod,
    ErrorCounts,
    audit,
    clopper_pearson_upper,
    eps_from_rates,
    gdp_delta_of_eps,
    gdp_mu_of_eps,
    max_auditable_eps,
    mu_from_rates,
    mu_to_eps,
    select_threshold,
)

P_ZERO_1000 = 1.0 - 0.025 ** (1.0 / 1000)


def separated_scores(n: int = 1000) -> ScoreSet:
    return ScoreSet.from_arrays(
        labels=[0] * n + [1] * n,
        scores=np.concatenate([np.zeros(n), np.ones(n)]),
    )


class TestClopperPearson:
    """Test the one-sided Clopper-Pearson upper bound."""

    def test_zero_successes_closed_form(self):
        """Test k=0 against 1 - (1 - level)^(1/n)."""
        assert clopper_pearson_upper(0, 1000, 0.975) == pytest.approx(P_ZERO_1000, rel=1e-9)
        assert clopper_pearson_upper(0, 1000, 0.975) == pytest.approx(0.003682, abs=1e-6)

    def test_all_successes(self):
        """Test that k == n saturates at 1."""
        assert clopper_pearson_upper(7, 7, 0.975) == 1.0

    def test_interior_value(self):
        """Test k=5, n=100 against the Beta(6, 95) quantile."""
        value = clopper_pearson_upper(5, 100, 0.975)
        assert 0.05 < value < 0.12
        assert value == pytest.approx(stats.beta.ppf(0.975, 6, 95))

    def test_never_below_observed_rate(self):
        """Test that the bound is at least k/n."""
        for k in range(0, 21, 5):
            assert clopper_pearson_upper(k, 20, 0.6) >= k / 20

    def test_no_trials(self):
        """Test that n = 0 is rejected."""
        with pytest.raises(ValueError):
            clopper_pearson_upper(0, 0, 0.975)


class TestPrivacyRegion:
    """Test the (epsilon, delta) region conversion."""

    def test_random_guessing(self):
        """Test that alpha = beta = 0.5 certifies nothing."""
        assert eps_from_rates(0.5, 0.5, 0.0) == 0.0

    def test_symmetric_rates(self):
        """Test (0.1, 0.1, 0) against ln 9."""
        assert eps_from_rates(0.1, 0.1, 0.0) == pytest.approx(math.log(9))

    def test_asymmetric_rates_with_delta(self):
        """Test (0.05, 0.2, 0.1) against max(ln 4.25, ln 14)."""
        assert eps_from_rates(0.05, 0.2, 0.1) == pytest.approx(math.log(14))

    def test_never_negative(self):
        """Test that a worse-than-chance attack gives 0."""
        assert eps_from_rates(0.9, 0.9, 0.0) == 0.0


class TestGaussianDp:
    """Test Gaussian-DP conversions."""

    def test_mu_random_guessing(self):
        """Test that alpha = beta = 0.5 gives mu = 0."""
        assert mu_from_rates(0.5, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_mu_two(self):
        """Test that rates of Phi(-1) give mu = 2."""
        assert mu_from_rates(0.158655, 0.158655) == pytest.approx(2.0, abs=1e-4)

    def test_mu_from_one_sided_rates(self):
        """Test (0.025, 0.5) against the 97.5% normal quantile."""
        assert mu_from_rates(0.025, 0.5) == pytest.approx(1.95996, abs=1e-5)

    def test_mu_rejects_saturated_rates(self):
        """Test that rates of 0 or 1 have no normal quantile."""
        with pytest.raises(ValueError):
            mu_from_rates(0.0, 0.5)
        with pytest.raises(ValueError):
            mu_from_rates(0.5, 1.0)

    def test_delta_of_zero_mu(self):
        """Test that mu = 0 is perfectly private."""
        assert gdp_delta_of_eps(0.0, 1.0) == 0.0

    def test_delta_at_eps_zero(self):
        """Test mu = 1, eps = 0 against Phi(0.5) - Phi(-0.5)."""
        assert gdp_delta_of_eps(1.0, 0.0) == pytest.approx(0.382925, abs=1e-6)

    def test_delta_decreases_in_eps(self):
        """Test that delta(eps) is decreasing."""
        deltas = [gdp_delta_of_eps(1.0, e) for e in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    def test_mu_to_eps_zero(self):
        """Test that mu = 0 converts to eps = 0."""
        assert mu_to_eps(0.0, 1e-5) == 0.0

    def test_mu_to_eps_inverse_of_delta(self):
        """Test that the delta at eps = 0 maps back to eps = 0."""
        assert mu_to_eps(1.0, 0.382925) == pytest.approx(0.0, abs=1e-6)

    def test_mu_of_eps_typical_budget(self):
        """Test eps = 1, delta = 1e-5 lands near mu = 0.27."""
        mu = gdp_mu_of_eps(1.0, 1e-5)
        assert 0.2 < mu < 0.35
        assert gdp_delta_of_eps(mu, 1.0) == pytest.approx(1e-5, rel=1e-4)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 4.0])
    def test_mu_eps_inverse(self, eps):
        """Test that mu_to_eps undoes gdp_mu_of_eps."""
        assert mu_to_eps(gdp_mu_of_eps(eps, 1e-5), 1e-5) == pytest.approx(eps, abs=1e-6)

    def test_mu_of_eps_rejects_pure_dp(self):
        """Test that delta = 0 has no GDP curve."""
        with pytest.raises(ValueError):
            gdp_mu_of_eps(1.0, 0.0)


class TestMaxAuditable:
    """Test the ceiling a perfect attack could reach."""

    def test_thousand_runs_per_world(self):
        """Test n0 = n1 = 1000 at 95% confidence."""
        expected = math.log((1 - P_ZERO_1000) / P_ZERO_1000)
        value = max_auditable_eps(1000, 1000, 0.0, 0.95)
        assert value == pytest.approx(expected)
        assert value == pytest.approx(5.60, abs=0.01)

    def test_grows_with_runs(self):
        """Test that more runs allow larger certified epsilons."""
        assert max_auditable_eps(100, 100, 0.0, 0.95) < max_auditable_eps(10000, 10000, 0.0, 0.95)

    def test_gdp_ceiling(self):
        """Test the Gaussian-DP ceiling against its closed form."""
        mu = 2 * stats.norm.isf(P_ZERO_1000)
        value = max_auditable_eps(1000, 1000, 1e-5, 0.95, AuditMethod.GDP_CONVERT)
        assert value == pytest.approx(mu_to_eps(mu, 1e-5), rel=1e-6)


class TestAudit:
    """Test auditing a test split at a fixed threshold."""

    def test_perfect_attack_hits_ceiling(self):
        """Test that zero errors yield the maximum auditable epsilon."""
        estimate = audit(separated_scores(), 0.5, 0.0, 0.95)
        assert estimate.counts == ErrorCounts(fp=0, fn_=0, n0=1000, n1=1000)
        assert estimate.eps_emp == pytest.approx(5.60, abs=0.01)
        assert estimate.eps_emp == estimate.max_auditable_eps

    def test_chance_level_attack(self):
        """Test that half the runs misclassified in each world gives 0."""
        labels = [0] * 1000 + [1] * 1000
        scores = np.tile([0.0, 1.0], 1000)
        estimate = audit(ScoreSet.from_arrays(labels, scores), 0.5, 0.0, 0.95)
        assert estimate.counts.fp == 500 and estimate.counts.fn_ == 500
        assert estimate.eps_emp == pytest.approx(0.0, abs=1e-9)

    def test_gdp_perfect_attack(self):
        """Test the GDP pipeline with zero errors."""
        estimate = audit(separated_scores(), 0.5, 1e-5, 0.95, AuditMethod.GDP_CONVERT)
        expected_mu = 2 * stats.norm.isf(P_ZERO_1000)
        assert estimate.mu_emp == pytest.approx(expected_mu, rel=1e-6)
        assert estimate.eps_emp == pytest.approx(mu_to_eps(expected_mu, 1e-5), rel=1e-6)

    def test_empty_test_split(self):
        """Test that an empty split cannot be audited."""
        with pytest.raises(ValueError):
            audit(ScoreSet.from_arrays([], []), 0.5, 0.0)

    def test_single_label_split(self):
        """Test that a split with one world cannot be audited."""
        with pytest.raises(ValueError):
            audit(ScoreSet.from_arrays([1, 1], [0.2, 0.3]), 0.5, 0.0)

    def test_gdp_requires_delta(self):
        """Test that the GDP conversion refuses delta = 0."""
        with pytest.raises(ValueError):
            audit(separated_scores(10), 0.5, 0.0, 0.95, AuditMethod.GDP_CONVERT)

    def test_infinite_threshold_serializes(self):
        """Test that an infinite tau survives to_dict as a string."""
        estimate = audit(separated_scores(10), math.inf, 0.0)
        assert estimate.to_dict()["tau"] == "inf"
        assert estimate.to_dict()["method"] == "eps_delta_region"


class TestSelectThreshold:
    """Test threshold selection on the holdout split."""

    def test_separated_scores(self):
        """Test that the chosen tau sits in the gap."""
        holdout = separated_scores()
        tau = select_threshold(holdout, 0.0)
        assert 0.0 < tau <= 1.0
        assert audit(holdout, tau, 0.0).eps_emp == pytest.approx(max_auditable_eps(1000, 1000, 0.0, 0.95))

    def test_point_mass(self):
        """Test that identical score distributions certify nothing at any tau."""
        holdout = ScoreSet.from_arrays([0] * 50 + [1] * 50, np.full(100, 0.3))
        tau = select_threshold(holdout, 0.0)
        assert tau == -math.inf
        assert audit(holdout, tau, 0.0).eps_emp == 0.0

    def test_shifted_gaussians(self):
        """Test that a unit mean shift is detected on 2000 runs per world."""
        rng = np.random.default_rng(0)
        scores = np.concatenate([rng.normal(0, 1, 2000), rng.normal(1, 1, 2000)])
        holdout = ScoreSet.from_arrays([0] * 2000 + [1] * 2000, scores)
        tau = select_threshold(holdout, 0.0)
        assert math.isfinite(tau)
        assert audit(holdout, tau, 0.0).eps_emp > 0

    def test_ties_go_to_smallest_threshold(self):
        """Test that equally good thresholds resolve to the smallest one."""
        holdout = ScoreSet.from_arrays([0, 0, 1, 1], [0.0, 0.0, 0.0, 0.0])
        assert select_threshold(holdout, 0.0) == -math.inf

    def test_gdp_selection(self):
        """Test threshold selection under the GDP conversion."""
        tau = select_threshold(separated_scores(), 1e-5, AuditMethod.GDP_CONVERT)
        assert 0.0 < tau <= 1.0

    def test_single_label_holdout(self):
        """Test that a holdout with one world is rejected."""
        with pytest.raises(ValueError):
            select_threshold(ScoreSet.from_arrays([0, 0], [0.1, 0.2]), 0.0)
