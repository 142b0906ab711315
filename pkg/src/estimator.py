"""Empirical privacy estimation from attack error counts.

Turns the false positive / false negative counts of a membership attack
into a lower bound on epsilon: Clopper-Pearson upper bounds on both error
rates are mapped through the (epsilon, delta) privacy region, or through a
Gaussian-DP conversion, at a chosen confidence.
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize, stats

from src.core.scores import ScoreSet

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-9


class AuditMethod(str, Enum):
    """How error-rate bounds are turned into an epsilon lower bound."""
    EPS_DELTA_REGION = "eps_delta_region"
    GDP_CONVERT = "gdp_convert"


@dataclass(frozen=True)
class ErrorCounts:
    """Errors of the decision rule b_hat = 1 iff score >= tau.

    Attributes:
        fp: Runs with b = 0 predicted as 1
        fn_: Runs with b = 1 predicted as 0
        n0: Runs with b = 0
        n1: Runs with b = 1
    """
    fp: int
    fn_: int
    n0: int
    n1: int

    def __post_init__(self):
        if min(self.fp, self.fn_, self.n0, self.n1) < 0:
            raise ValueError("Error counts must be non-negative")
        if self.fp > self.n0 or self.fn_ > self.n1:
            raise ValueError(f"Inconsistent error counts {self}")

    @classmethod
    def at_threshold(cls, scores: ScoreSet, tau: float) -> "ErrorCounts":
        s0 = scores.scores[scores.labels == 0]
        s1 = scores.scores[scores.labels == 1]
        return cls(
            fp=int(np.sum(s0 >= tau)),
            fn_=int(np.sum(s1 < tau)),
            n0=len(s0),
            n1=len(s1),
        )


@dataclass(frozen=True)
class EpsilonEstimate:
    """Result of one audit at a fixed threshold."""
    eps_emp: float
    mu_emp: Optional[float]
    alpha_bar: float
    beta_bar: float
    tau: float
    delta: float
    confidence: float
    max_auditable_eps: float
    method: AuditMethod
    counts: ErrorCounts

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["method"] = self.method.value
        # JSON has no infinity
        data["tau"] = self.tau if math.isfinite(self.tau) else str(self.tau)
        return data


def clopper_pearson_upper(k: int, n: int, level: float) -> float:
    """One-sided Clopper-Pearson upper bound on a binomial proportion.

    Args:
        k: Observed successes, 0 <= k <= n
        n: Trials, at least 1
        level: One-sided confidence level in (0, 1)

    Returns:
        The Beta(k+1, n-k) quantile at `level`, or 1.0 when k == n

    Raises:
        ValueError: If n is 0 or the arguments are out of range
    """
    if n < 1:
        raise ValueError("Clopper-Pearson bound needs at least one trial")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    if not 0 < level < 1:
        raise ValueError(f"level={level} outside (0, 1)")
    if k == n:
        return 1.0
    return float(max(stats.beta.ppf(level, k + 1, n - k), k / n))


def _cp_upper_array(k: np.ndarray, n: int, level: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        upper = stats.beta.ppf(level, k + 1, np.maximum(n - k, 1e-300))
    upper = np.where(k >= n, 1.0, upper)
    return np.maximum(upper, k / n)


def _eps_region(alpha_bar, beta_bar, delta):
    alpha_bar = np.asarray(alpha_bar, dtype=float)
    beta_bar = np.asarray(beta_bar, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.log(np.maximum(1.0 - alpha_bar - delta, 0.0) / beta_bar)
        second = np.log(np.maximum(1.0 - beta_bar - delta, 0.0) / alpha_bar)
    first = np.nan_to_num(first, nan=0.0, neginf=0.0)
    second = np.nan_to_num(second, nan=0.0, neginf=0.0)
    return np.maximum(np.maximum(first, second), 0.0)


def eps_from_rates(alpha_bar: float, beta_bar: float, delta: float) -> float:
    """Largest epsilon ruled out by error rates in the (epsilon, delta) region.

    Terms with a non-positive numerator contribute 0.
    """
    if not (0 < alpha_bar <= 1 and 0 < beta_bar <= 1):
        raise ValueError("Error-rate bounds must lie in (0, 1]")
    if not 0 <= delta < 1:
        raise ValueError(f"delta={delta} outside [0, 1)")
    return float(_eps_region(alpha_bar, beta_bar, delta))


def _mu_array(alpha_bar, beta_bar) -> np.ndarray:
    alpha_bar = np.asarray(alpha_bar, dtype=float)
    beta_bar = np.asarray(beta_bar, dtype=float)
    saturated = (alpha_bar >= 1.0) | (beta_bar >= 1.0)
    a = np.clip(alpha_bar, 1e-300, 1.0)
    b = np.clip(beta_bar, 1e-300, 1.0)
    with np.errstate(invalid="ignore"):
        mu = stats.norm.isf(a) - stats.norm.ppf(b)
    mu = np.where(saturated, 0.0, mu)
    return np.maximum(np.nan_to_num(mu, nan=0.0), 0.0)


def mu_from_rates(alpha_bar: float, beta_bar: float) -> float:
    """Gaussian-DP parameter implied by error-rate bounds, clamped at 0.

    Raises:
        ValueError: If either rate is 0 or 1, where the normal quantile is infinite
    """
    if not (0 < alpha_bar < 1 and 0 < beta_bar < 1):
        raise ValueError("mu_from_rates needs error-rate bounds strictly inside (0, 1)")
    return float(_mu_array(alpha_bar, beta_bar))


def gdp_delta_of_eps(mu: float, eps: float) -> float:
    """The delta at which a mu-GDP mechanism is (eps, delta)-DP."""
    if mu < 0 or eps < 0:
        raise ValueError("mu and eps must be non-negative")
    if mu == 0:
        return 0.0
    upper = -eps / mu + mu / 2.0
    lower = -eps / mu - mu / 2.0
    value = math.exp(stats.norm.logcdf(upper)) - math.exp(eps + stats.norm.logcdf(lower))
    return float(min(max(value, 0.0), np.nextafter(1.0, 0.0)))


def mu_to_eps(mu: float, delta: float) -> float:
    """Smallest epsilon such that a mu-GDP mechanism is (eps, delta)-DP.

    Returns 0 when the mechanism already meets delta at eps = 0.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    if not 0 < delta < 1:
        raise ValueError(f"delta={delta} outside (0, 1)")
    if mu == 0 or gdp_delta_of_eps(mu, 0.0) <= delta:
        return 0.0

    def gap(eps: float) -> float:
        return gdp_delta_of_eps(mu, eps) - delta

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
    return float(optimize.brentq(gap, 0.0, hi, xtol=ROOT_XTOL))


def gdp_mu_of_eps(eps: float, delta: float) -> float:
    """The mu whose GDP curve passes through (eps, delta).

    Used by mechanisms to turn an (eps, delta) budget into a Gaussian-DP target.

    Raises:
        ValueError: If eps <= 0 or delta is outside (0, 1)
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta={delta} outside (0, 1)")

    def gap(mu: float) -> float:
        return gdp_delta_of_eps(mu, eps) - delta

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(gap, 0.0, hi, xtol=ROOT_XTOL))


def _joint_level(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise ValueError(f"confidence={confidence} outside (0, 1)")
    return 1.0 - (1.0 - confidence) / 2.0


def _check_method(method: AuditMethod, delta: float) -> AuditMethod:
    method = AuditMethod(method)
    if method == AuditMethod.GDP_CONVERT and not 0 < delta < 1:
        raise ValueError("Gaussian-DP conversion needs delta in (0, 1)")
    if method == AuditMethod.EPS_DELTA_REGION and not 0 <= delta < 1:
        raise ValueError(f"delta={delta} outside [0, 1)")
    return method


def _bounds_to_eps(alpha_bar: float, beta_bar: float, delta: float,
                   method: AuditMethod) -> Tuple[float, Optional[float]]:
    if method == AuditMethod.EPS_DELTA_REGION:
        return float(_eps_region(alpha_bar, beta_bar, delta)), None
    mu = float(_mu_array(alpha_bar, beta_bar))
    return mu_to_eps(mu, delta), mu


def max_auditable_eps(n0: int, n1: int, delta: float, confidence: float,
                      method: AuditMethod = AuditMethod.EPS_DELTA_REGION) -> float:
    """Epsilon a zero-error attack would certify with n0 and n1 trials."""
    if n0 < 1 or n1 < 1:
        raise ValueError("Both worlds need at least one trial")
    method = _check_method(method, delta)
    level = _joint_level(confidence)
    alpha_bar = clopper_pearson_upper(0, n0, level)
    beta_bar = clopper_pearson_upper(0, n1, level)
    return _bounds_to_eps(alpha_bar, beta_bar, delta, method)[0]


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    distinct = np.unique(scores)
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate([[-np.inf], midpoints, [np.inf]])


def select_threshold(holdout: ScoreSet, delta: float,
                     method: AuditMethod = AuditMethod.EPS_DELTA_REGION,
                     confidence: float = 0.95) -> float:
    """Threshold maximizing the audited epsilon on a holdout split.

    Candidates are midpoints between consecutive distinct scores plus the
    two infinite sentinels. Ties go to the smallest threshold.

    Args:
        holdout: Scores reserved for threshold choice
        delta: Delta used by the audit
        method: Conversion used by the audit
        confidence: Joint confidence of the two error-rate bounds

    Returns:
        The chosen threshold tau

    Raises:
        ValueError: If the holdout lacks one of the labels
    """
    method = _check_method(method, delta)
    n0, n1 = holdout.n0, holdout.n1
    if n0 == 0 or n1 == 0:
        raise ValueError("Threshold holdout must contain both labels")

    candidates = _candidate_thresholds(holdout.scores)
    s0 = np.sort(holdout.scores[holdout.labels == 0])
    s1 = np.sort(holdout.scores[holdout.labels == 1])
    fp = n0 - np.searchsorted(s0, candidates, side="left")
    fn = np.searchsorted(s1, candidates, side="left")

    level = _joint_level(confidence)
    alpha_bar = _cp_upper_array(fp, n0, level)
    beta_bar = _cp_upper_array(fn, n1, level)

    if method == AuditMethod.EPS_DELTA_REGION:
        best = int(np.argmax(_eps_region(alpha_bar, beta_bar, delta)))
    else:
        # mu_to_eps is non-decreasing in mu, so the best mu gives the best eps
        mu = _mu_array(alpha_bar, beta_bar)
        best = int(np.argmax(mu))
        if mu_to_eps(float(mu[best]), delta) == 0.0:
            best = 0

    tau = float(candidates[best])
    logger.debug(f"Selected tau={tau} from {len(candidates)} candidates (n0={n0}, n1={n1})")
    return tau


def audit(test: ScoreSet, tau: float, delta: float, confidence: float = 0.95,
          method: AuditMethod = AuditMethod.EPS_DELTA_REGION) -> EpsilonEstimate:
    """Lower-bound epsilon from the errors of threshold tau on a test split.

    Each error rate gets a one-sided Clopper-Pearson bound at level
    1 - (1 - confidence) / 2 so that both hold jointly with `confidence`.

    Raises:
        ValueError: If the test split is empty or lacks a label
    """
    method = _check_method(method, delta)
    if len(test) == 0:
        raise ValueError("Cannot audit an empty test split")
    counts = ErrorCounts.at_threshold(test, tau)
    if counts.n0 == 0 or counts.n1 == 0:
        raise ValueError("Test split must contain both labels")

    level = _joint_level(confidence)
    alpha_bar = clopper_pearson_upper(counts.fp, counts.n0, level)
    beta_bar = clopper_pearson_upper(counts.fn_, counts.n1, level)
    eps_emp, mu_emp = _bounds_to_eps(alpha_bar, beta_bar, delta, method)
    ceiling = max_auditable_eps(counts.n0, counts.n1, delta, confidence, method)

    estimate = EpsilonEstimate(
        eps_emp=min(eps_emp, ceiling),
        mu_emp=mu_emp,
        alpha_bar=alpha_bar,
        beta_bar=beta_bar,
        tau=float(tau),
        delta=float(delta),
        confidence=float(confidence),
        max_auditable_eps=ceiling,
        method=method,
        counts=counts,
    )
    logger.debug(
        f"Audit at tau={tau}: fp={counts.fp}/{counts.n0}, fn={counts.fn_}/{counts.n1}, "
        f"eps_emp={estimate.eps_emp:.4f} (max {ceiling:.4f})"
    )
    return estimate
