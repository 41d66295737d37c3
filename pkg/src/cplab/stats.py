"""Statistics for extinction-time experiments.

One-sample KS against the unit exponential (the metastable limit law),
censoring-aware summaries, a two-sample count comparison for the tree
coupling harness, and small fitting helpers for scaling plots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats as sps

__all__ = [
    "ks_exp1",
    "dkw_halfwidth",
    "fit_line",
    "rank_sum_greater",
    "pooled_count_comparison",
    "kaplan_meier",
    "MetastabilityReport",
    "metastability_test",
]


def ks_exp1(samples):
    """One-sample KS statistic and asymptotic p-value against Exp(1).

    The statistic is the exact sup-distance of the empirical CDF from
    1 - e^(-x); the p-value uses the Kolmogorov limit law with the usual
    finite-sample scale correction.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("need at least one sample")
    if np.any(x < 0):
        raise ValueError("exponential support is nonnegative")
    cdf = -np.expm1(-x)
    ranks = np.arange(1, m + 1)
    d_plus = np.max(ranks / m - cdf)
    d_minus = np.max(cdf - (ranks - 1) / m)
    d = max(d_plus, d_minus)
    scale = math.sqrt(m) + 0.12 + 0.11 / math.sqrt(m)
    return float(d), float(special.kolmogorov(scale * d))


def dkw_halfwidth(m, alpha=0.05):
    """Uniform CDF confidence halfwidth at level 1 - alpha."""
    if m < 1 or not 0 < alpha < 1:
        raise ValueError("need m >= 1 and alpha in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))


def fit_line(x, y):
    """Least squares y = a*x + b; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two aligned points at least")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("x values are all equal")
    sxy = np.sum((x - xm) * (y - ym))
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    syy = np.sum((y - ym) ** 2)
    r2 = 1.0 if syy == 0 else 1.0 - float(np.sum(resid**2)) / float(syy)
    return float(slope), float(intercept), r2


def rank_sum_greater(a, b):
    """P-value for 'a is stochastically larger than b' (rank-sum test)."""
    return float(sps.mannwhitneyu(a, b, alternative="greater").pvalue)


def pooled_count_comparison(counts_a, counts_b, min_column=10.0):
    """Chi-square homogeneity test of two count vectors over shared bins.

    Adjacent bins are pooled deterministically from the right until every
    pooled column total reaches `min_column`, which keeps the asymptotic
    null valid for sparse tails.  Returns (statistic, p_value, dof).
    """
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("count vectors must be aligned 1-d")
    tot = a + b
    cols_a, cols_b = [], []
    acc_a = acc_b = 0.0
    for i in range(a.size):
        acc_a += a[i]
        acc_b += b[i]
        if acc_a + acc_b >= min_column:
            cols_a.append(acc_a)
            cols_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if cols_a:
            cols_a[-1] += acc_a
            cols_b[-1] += acc_b
        else:
            cols_a, cols_b = [acc_a], [acc_b]
    a = np.array(cols_a)
    b = np.array(cols_b)
    if a.size < 2:
        raise ValueError("too little data to compare after pooling")
    na, nb = a.sum(), b.sum()
    col = a + b
    exp_a = col * (na / (na + nb))
    exp_b = col * (nb / (na + nb))
    stat = float(np.sum((a - exp_a) ** 2 / exp_a) + np.sum((b - exp_b) ** 2 / exp_b))
    dof = a.size - 1
    return stat, float(sps.chi2.sf(stat, dof)), dof


def kaplan_meier(times, censored):
    """Product-limit survival curve under right censoring.

    Returns (t, survival, at_risk) step-function arrays starting at
    (0, 1, m).  At tied times, deaths are processed before censorings.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(censored, dtype=bool)
    if t.shape != c.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("need aligned nonempty times and censor flags")
    order = np.lexsort((c, t))  # deaths (False) first within a tie
    t, c = t[order], c[order]
    out_t, out_s, out_r = [0.0], [1.0], [t.size]
    at_risk = t.size
    surv = 1.0
    i = 0
    while i < t.size:
        j = i
        deaths = 0
        while j < t.size and t[j] == t[i] and not c[j]:
            deaths += 1
            j += 1
        while j < t.size and t[j] == t[i]:
            j += 1  # censored at the same time leave after the deaths
        if deaths:
            surv *= 1.0 - deaths / at_risk
            out_t.append(float(t[i]))
            out_s.append(surv)
            out_r.append(at_risk)
        at_risk -= j - i
        i = j
    return np.array(out_t), np.array(out_s), np.array(out_r)


@dataclass(frozen=True)
class MetastabilityReport:
    """Verdict on whether normalized extinction times look unit-exponential.

    When `evaluable` is False (too few uncensored runs, or censoring above
    the 1% bar) the statistic fields are None and `reason` explains why.
    The normalization uses the sample mean; the induced bias is of order
    1/sqrt(count) and is reported, not corrected.
    """

    count: int
    censor_fraction: float
    mean: float | None
    ks_stat: float | None
    pvalue: float | None
    threshold: float
    passed: bool
    evaluable: bool
    reason: str | None
    mean_rel_err: float | None


_MIN_UNCENSORED = 200
_MAX_CENSOR_FRACTION = 0.01


def metastability_test(taus, censored, threshold=0.08):
    """Test tau/mean(tau) against Exp(1) on the uncensored records."""
    t = np.asarray(taus, dtype=float)
    c = np.asarray(censored, dtype=bool)
    if t.shape != c.shape or t.ndim != 1:
        raise ValueError("need aligned 1-d records")
    total = t.size
    frac = float(c.sum()) / total if total else 1.0
    clean = t[~c]
    if clean.size < _MIN_UNCENSORED:
        return MetastabilityReport(
            clean.size, frac, None, None, None, threshold, False, False,
            f"need {_MIN_UNCENSORED} uncensored records, have {clean.size}", None,
        )
    if frac >= _MAX_CENSOR_FRACTION:
        return MetastabilityReport(
            clean.size, frac, None, None, None, threshold, False, False,
            f"censor fraction {frac:.3f} at or above {_MAX_CENSOR_FRACTION}", None,
        )
    mean = float(clean.mean())
    if mean <= 0:
        return MetastabilityReport(
            clean.size, frac, mean, None, None, threshold, False, False,
            "nonpositive sample mean", None,
        )
    stat, pval = ks_exp1(clean / mean)
    return MetastabilityReport(
        clean.size, frac, mean, stat, pval, threshold,
        stat < threshold, True, None, 1.0 / math.sqrt(clean.size),
    )
