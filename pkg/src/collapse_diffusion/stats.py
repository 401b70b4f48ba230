"""Goodness-of-fit and moment comparisons between samplers, PDE and closed forms.

KS decisions use fixed critical values at the 1% level rather than
p-values, so pass/fail is deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

KS_COEFF = 1.63  # asymptotic 1% critical value of sqrt(n) * D_n


@dataclass
class SampleSet:
    values: np.ndarray
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.isnan(self.values)):
            raise ValueError("sample set contains NaN")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("samples must be finite and non-negative")


@dataclass
class GofReport:
    ks_statistic: float
    n: int
    threshold: float
    moments: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.ks_statistic < self.threshold

    def as_dict(self):
        return {"ks_statistic": self.ks_statistic, "n": self.n, "threshold": self.threshold,
                "pass": bool(self.passed), "moments": self.moments}


def _values(samples):
    v = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if np.any(np.isnan(v)):
        raise ValueError("sample set contains NaN")
    return v


def ks_threshold(n, m=None):
    if m is None:
        return KS_COEFF / math.sqrt(n)
    return KS_COEFF * math.sqrt((n + m) / (n * m))


def ks_test(samples, cdf) -> GofReport:
    """One-sample KS statistic against a callable CDF, threshold 1.63/sqrt(n)."""
    v = _values(samples)
    if len(v) < 100:
        raise ValueError("KS test needs at least 100 samples")
    d = float(sps.kstest(v, cdf).statistic)
    return GofReport(d, len(v), ks_threshold(len(v)))


def ks_two_sample(a, b) -> GofReport:
    """Two-sample KS at the 1% level, threshold 1.63 sqrt((n+m)/(nm))."""
    a, b = _values(a), _values(b)
    d = float(sps.ks_2samp(a, b).statistic)
    return GofReport(d, len(a), ks_threshold(len(a), len(b)))


def moment_compare(samples, analytic_mean, analytic_var):
    """z-scores of the sample mean and variance against analytic values.

    Standard errors: s/sqrt(n) for the mean and sqrt((m4 - s^4)/n) for the
    variance, both estimated from the sample.
    """
    v = _values(samples)
    n = len(v)
    if n < 100:
        raise ValueError("moment comparison needs at least 100 samples")
    mean = float(v.mean())
    var = float(v.var(ddof=1))
    m4 = float(np.mean((v - mean) ** 4))
    se_mean = math.sqrt(var / n)
    se_var = math.sqrt(max(m4 - var ** 2, 0.0) / n)
    return {
        "sample_mean": mean, "analytic_mean": float(analytic_mean),
        "z_mean": (mean - analytic_mean) / se_mean,
        "sample_var": var, "analytic_var": float(analytic_var),
        "z_var": (var - analytic_var) / se_var if se_var > 0 else math.inf,
    }


def _grid_arrays(g):
    if hasattr(g, "energies") and hasattr(g, "density"):
        return np.asarray(g.energies), np.asarray(g.density)
    if hasattr(g, "energies") and hasattr(g, "p"):
        return np.asarray(g.energies), np.asarray(g.p)
    e, p = g
    return np.asarray(e, dtype=float), np.asarray(p, dtype=float)


def l1_distance(grid_a, grid_b) -> float:
    """Trapezoid integral of |p_a - p_b| on the union of both grids.

    Each density is linearly interpolated and taken as zero outside its own
    grid. Accepts DensityGrid, FpGrid or (energies, density) pairs.
    """
    ea, pa = _grid_arrays(grid_a)
    eb, pb = _grid_arrays(grid_b)
    if ea[-1] < eb[0] or eb[-1] < ea[0]:
        raise ValueError("density supports are disjoint")
    e = np.union1d(ea, eb)
    fa = np.interp(e, ea, pa, left=0.0, right=0.0)
    fb = np.interp(e, eb, pb, left=0.0, right=0.0)
    return float(np.trapezoid(np.abs(fa - fb), e))
