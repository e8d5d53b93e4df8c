"""Statistical checks backing the verification suite.

Kolmogorov-Smirnov one- and two-sample tests with asymptotic p-values, a
Poisson dispersion test on window counts, lag autocorrelation, and normal
confidence intervals for means.  Only what the acceptance experiments need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.special import kolmogorov
from scipy.stats import chi2, norm


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    n: Tuple[int, ...]

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value out of range: {self.p_value}")


def _clean(sample) -> np.ndarray:
    a = np.asarray(sample, dtype=float)
    if a.ndim != 1:
        raise ValueError("sample must be one-dimensional")
    if np.isnan(a).any():
        raise ValueError("sample contains NaN")
    return np.sort(a)


def ks_one_sample(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> TestResult:
    """Sup-distance between the empirical CDF and ``cdf``, asymptotic p."""
    a = _clean(sample)
    n = len(a)
    if n < 10:
        raise ValueError(f"need at least 10 observations, got {n}")
    f = np.asarray(cdf(a), dtype=float)
    grid = np.arange(1, n + 1) / n
    d = float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))
    p = float(kolmogorov(d * np.sqrt(n)))
    return TestResult(statistic=d, p_value=min(max(p, 0.0), 1.0), n=(n,))


def ks_two_sample(a, b) -> TestResult:
    """Two-sample sup-distance with the effective-size asymptotic p-value."""
    a = _clean(a)
    b = _clean(b)
    n, m = len(a), len(b)
    if n < 10 or m < 10:
        raise ValueError("need at least 10 observations per sample")
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="mergesort")
    steps = np.where(order < n, 1.0 / n, -1.0 / m)
    walk = np.cumsum(steps)
    # with ties, the CDF gap is only defined once a whole tie group is in
    ends = np.append(pooled[order][1:] != pooled[order][:-1], True)
    d = float(np.max(np.abs(walk[ends])))
    n_eff = n * m / (n + m)
    p = float(kolmogorov(d * np.sqrt(n_eff)))
    return TestResult(statistic=d, p_value=min(max(p, 0.0), 1.0), n=(n, m))


def poisson_dispersion(counts) -> TestResult:
    """Index of dispersion (variance/mean) with a two-sided chi-square p."""
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or len(c) < 30:
        raise ValueError("need at least 30 windows")
    mean = c.mean()
    if mean <= 0.0:
        raise ValueError("window counts have zero mean")
    n = len(c)
    disp = float(c.var(ddof=1) / mean)
    stat = (n - 1) * disp
    p = 2.0 * min(chi2.cdf(stat, n - 1), chi2.sf(stat, n - 1))
    return TestResult(statistic=disp, p_value=float(min(p, 1.0)), n=(n,))


def mean_ci(sample, level: float = 0.99) -> Tuple[float, float]:
    """Normal-approximation confidence interval: (mean, half width)."""
    a = np.asarray(sample, dtype=float)
    if a.ndim != 1 or len(a) < 2:
        raise ValueError("need at least 2 observations")
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    z = norm.ppf(0.5 * (1.0 + level))
    half = float(z * a.std(ddof=1) / np.sqrt(len(a)))
    return float(a.mean()), half


def lag_autocorrelation(sample, lag: int = 1) -> float:
    """Sample autocorrelation at the given lag."""
    a = np.asarray(sample, dtype=float)
    if len(a) <= lag + 1:
        raise ValueError("sample too short for this lag")
    a = a - a.mean()
    denom = float(np.dot(a, a))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a[:-lag], a[lag:]) / denom)
