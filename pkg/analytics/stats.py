from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

CONFIDENCE_LEVEL = 0.95


@dataclass(frozen=True)
class ConfidenceInterval:
    """Normal-approximation confidence interval of a mean

    With fewer than two samples the half width is 0.
    """

    mean: float
    half_width: float
    count: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "mean": self.mean,
            "low": self.low,
            "high": self.high,
            "half_width": self.half_width,
            "count": self.count,
        }


def _z_value(level: float) -> float:
    return float(stats.norm.ppf(0.5 + level / 2.0))


def confidence_interval(samples: np.ndarray, level: float = CONFIDENCE_LEVEL) -> ConfidenceInterval:
    """Confidence interval of the mean of per-episode samples

    Raises:
        ValueError: No sample
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("Confidence interval of no sample.")
    mean = float(samples.mean())
    if samples.size < 2:
        return ConfidenceInterval(mean, 0.0, 1)
    standard_error = float(samples.std(ddof=1) / np.sqrt(samples.size))
    return ConfidenceInterval(mean, _z_value(level) * standard_error, int(samples.size))


def series_confidence(
    samples: np.ndarray, level: float = CONFIDENCE_LEVEL
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and half width per column of an (episodes, ticks) array"""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] == 0:
        raise ValueError("Confidence interval of no sample.")
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return mean, np.zeros_like(mean)
    standard_error = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return mean, _z_value(level) * standard_error


@dataclass(frozen=True)
class MeanTest:
    """Two-sided Welch test of equal means"""

    statistic: float
    p_value: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def two_sided_mean_test(a: np.ndarray, b: np.ndarray) -> MeanTest:
    """Welch's t-test; identical constant samples give p = 1"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    result = stats.ttest_ind(a, b, equal_var=False)
    statistic = float(result.statistic)
    p_value = float(result.pvalue)
    if np.isnan(p_value):
        return MeanTest(0.0, 1.0 if np.allclose(a.mean(), b.mean()) else 0.0)
    return MeanTest(statistic, p_value)
