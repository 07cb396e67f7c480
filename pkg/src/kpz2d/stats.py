"""Moment estimation with jackknife uncertainties, KS tests, trend verdicts.

All reports are pure, deterministic functions of the sample values: standard
errors come from the delete-one jackknife (not the bootstrap) so repeated
runs of the same archive produce bit-identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError

KS_1PCT_COEFF = 1.628  # asymptotic 1% critical value is KS_1PCT_COEFF / sqrt(n)


def _values(samples) -> np.ndarray:
    vals = getattr(samples, "values", samples)
    return np.asarray(vals, dtype=float)


@dataclass(frozen=True)
class MomentReport:
    n: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    excess_kurtosis_se: float
    ks_distance: float | None = None
    ks_threshold_at_1pct: float | None = None

    def rows(self) -> list[tuple[str, float, float | None]]:
        out = [
            ("mean", self.mean, self.mean_se),
            ("variance", self.variance, self.variance_se),
            ("skewness", self.skewness, self.skewness_se),
            ("excess_kurtosis", self.excess_kurtosis, self.excess_kurtosis_se),
        ]
        if self.ks_distance is not None:
            out.append(("ks_distance", self.ks_distance, None))
            out.append(("ks_threshold_1pct", self.ks_threshold_at_1pct, None))
        return out


def _delete_one_moments(x: np.ndarray):
    """Central moments 2..4 of every delete-one subsample, via power sums."""
    n = len(x)
    s1, s2, s3, s4 = (np.sum(x**k) for k in (1, 2, 3, 4))
    m = n - 1
    t1 = (s1 - x) / m
    t2 = (s2 - x**2) / m
    t3 = (s3 - x**3) / m
    t4 = (s4 - x**4) / m
    mu2 = t2 - t1**2
    mu3 = t3 - 3 * t1 * t2 + 2 * t1**3
    mu4 = t4 - 4 * t1 * t3 + 6 * t1**2 * t2 - 3 * t1**4
    return t1, mu2, mu3, mu4


def _jackknife_se(estimates: np.ndarray) -> float:
    n = len(estimates)
    centered = estimates - estimates.mean()
    return float(math.sqrt((n - 1) / n * np.sum(centered**2)))


def moment_report(samples, ref_mean: float | None = None, ref_var: float | None = None) -> MomentReport:
    """Unbiased mean/variance plus skewness and excess kurtosis, all with
    jackknife standard errors; optionally attaches the KS distance against
    the fully specified Gaussian reference."""
    x = _values(samples)
    n = len(x)
    if n < 8:
        raise ConfigError(f"moment_report requires n >= 8 samples, got {n}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    mu2 = x.var(ddof=0)
    mu3 = float(np.mean((x - mean) ** 3))
    mu4 = float(np.mean((x - mean) ** 4))
    if mu2 > 0:
        skew = mu3 / mu2**1.5
        kurt = mu4 / mu2**2 - 3.0
    else:
        skew = 0.0
        kurt = 0.0

    t1, d_mu2, d_mu3, d_mu4 = _delete_one_moments(x)
    d_var = d_mu2 * (n - 1) / (n - 2)
    safe = np.where(d_mu2 > 0, d_mu2, 1.0)
    d_skew = np.where(d_mu2 > 0, d_mu3 / safe**1.5, 0.0)
    d_kurt = np.where(d_mu2 > 0, d_mu4 / safe**2 - 3.0, 0.0)

    ks = thr = None
    if ref_mean is not None and ref_var is not None:
        ks = ks_distance(x, ref_mean, ref_var)
        thr = KS_1PCT_COEFF / math.sqrt(n)

    return MomentReport(
        n=n,
        mean=mean,
        mean_se=_jackknife_se(t1),
        variance=var,
        variance_se=_jackknife_se(d_var),
        skewness=float(skew),
        skewness_se=_jackknife_se(d_skew),
        excess_kurtosis=float(kurt),
        excess_kurtosis_se=_jackknife_se(d_kurt),
        ks_distance=ks,
        ks_threshold_at_1pct=thr,
    )


def ks_distance(samples, ref_mean: float, ref_var: float) -> float:
    """Sup distance between the empirical CDF and N(ref_mean, ref_var).

    A zero-variance reference is a point mass; the distance degenerates to
    max |sample - ref_mean|.
    """
    x = _values(samples)
    if ref_var < 0.0:
        raise ConfigError(f"ref_var must be >= 0, got {ref_var}")
    if len(x) == 0:
        raise ConfigError("ks_distance requires at least one sample")
    if ref_var == 0.0:
        return float(np.max(np.abs(x - ref_mean)))
    xs = np.sort(x)
    n = len(xs)
    cdf = ndtr((xs - ref_mean) / math.sqrt(ref_var))
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True)
class WickReport:
    """Centered sample moments p = 3, 4 against the Gaussian predictions."""

    n: int
    sigma_sq: float
    moment3: float
    moment3_se: float
    expected3: float
    moment4: float
    moment4_se: float
    expected4: float

    def discrepancy_in_se(self, p: int) -> float:
        m, se, exp = {
            3: (self.moment3, self.moment3_se, self.expected3),
            4: (self.moment4, self.moment4_se, self.expected4),
        }[p]
        if se == 0.0:
            return 0.0 if m == exp else math.inf
        return abs(m - exp) / se


def wick_check(samples, sigma_sq: float) -> WickReport:
    from .theory import wick_moment

    x = _values(samples)
    n = len(x)
    if n < 100:
        raise ConfigError(f"wick_check requires n >= 100 samples, got {n}")
    mean = x.mean()
    mu3 = float(np.mean((x - mean) ** 3))
    mu4 = float(np.mean((x - mean) ** 4))
    _, _, d_mu3, d_mu4 = _delete_one_moments(x)
    return WickReport(
        n=n,
        sigma_sq=sigma_sq,
        moment3=mu3,
        moment3_se=_jackknife_se(d_mu3),
        expected3=wick_moment(3, sigma_sq),
        moment4=mu4,
        moment4_se=_jackknife_se(d_mu4),
        expected4=wick_moment(4, sigma_sq),
    )


@dataclass(frozen=True)
class TrendVerdict:
    monotone_nonincreasing: bool
    violated_index: int | None = None

    def __str__(self) -> str:
        if self.monotone_nonincreasing:
            return "monotone_nonincreasing"
        return f"violated({self.violated_index})"


def trend_test(values, slack: float = 0.0) -> TrendVerdict:
    """Verdict on whether the ordered values are non-increasing up to ``slack``."""
    vals = _values(values)
    if len(vals) < 2:
        raise ConfigError("trend_test requires at least 2 values")
    for i in range(1, len(vals)):
        if vals[i] > vals[i - 1] + slack:
            return TrendVerdict(monotone_nonincreasing=False, violated_index=i)
    return TrendVerdict(monotone_nonincreasing=True)
