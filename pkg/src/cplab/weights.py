"""Vertex-weight models and the offspring laws they induce.

Weights are i.i.d. draws from a law supported on [1, inf).  In the rank-one
random graph built from such weights, the neighborhood of a uniformly chosen
vertex is approximated by a mixed-Poisson branching process: the root
reproduces with a Poisson law mixed over the plain weight, every later
generation with a Poisson law mixed over the size-biased weight.  This module
evaluates those laws, their truncations, the depth/budget constants used by
the structure search, and a few scalar diagnostics.

Atom-based models (constant, two-point, table) evaluate expectations as exact
finite sums.  The power-law model integrates numerically; adaptive quadrature
at relative tolerance 1e-10 with an explicit tail cutoff keeps results
reproducible across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "WeightModel",
    "ScaleFunction",
    "Truncation",
    "WeightMoments",
    "CapSelection",
    "SearchBudgets",
    "TailBoundReport",
    "moments",
    "degree_pmf",
    "offspring_pmf",
    "size_biased_sample",
    "source_offspring_pmf",
    "truncated_offspring_pmf",
    "truncated_offspring_mean",
    "select_cap",
    "search_budgets",
    "star_hold_exponent",
    "offspring_tail_report",
    "removal_tolerance",
]

_QUAD_RTOL = 1e-10
_INT64_MAX = 2**63 - 1
# tail mass below this is ignored when summing pmf series
_TAIL_TOL = 1e-9


class WeightModel:
    """Law of a single vertex weight, supported on [1, inf).

    Kinds: ``constant(c)``, ``two_point(low, high, p_high)``,
    ``powerlaw(alpha, xmin)`` (Pareto density (alpha-1) xmin^(alpha-1)
    w^(-alpha) for w >= xmin), and ``table(values, probs)``.  The first
    moment must be finite, which for the power law means alpha > 2.
    """

    def __init__(self, kind, values=None, probs=None, alpha=None, xmin=None):
        self.kind = kind
        if kind == "powerlaw":
            alpha = float(alpha)
            xmin = float(xmin)
            if alpha <= 2:
                raise ValueError("power-law exponent must exceed 2 (finite mean)")
            if xmin < 1:
                raise ValueError("power-law minimum must be >= 1 (weights live on [1, inf))")
            self.alpha = alpha
            self.xmin = xmin
            self.values = None
            self.probs = None
            return
        if kind not in ("constant", "two_point", "table"):
            raise ValueError(f"unknown weight model kind {kind!r}")
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.size == 0:
            raise ValueError("atom model needs at least one atom")
        if values.size != probs.size:
            raise ValueError("values and probabilities must align")
        if np.any(values < 1):
            raise ValueError("weights must be >= 1")
        if np.any(probs < 0):
            raise ValueError("atom probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1")
        order = np.argsort(values)
        self.values = values[order]
        self.probs = probs[order]
        self.alpha = None
        self.xmin = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, c):
        return cls("constant", values=[c], probs=[1.0])

    @classmethod
    def two_point(cls, low, high, p_high):
        if not 0.0 <= p_high <= 1.0:
            raise ValueError("atom probability must lie in [0, 1]")
        return cls("two_point", values=[low, high], probs=[1.0 - p_high, p_high])

    @classmethod
    def powerlaw(cls, alpha, xmin=1.0):
        return cls("powerlaw", alpha=alpha, xmin=xmin)

    @classmethod
    def table(cls, values, probs):
        return cls("table", values=values, probs=probs)

    # -- basic queries --------------------------------------------------

    @property
    def is_atomic(self):
        return self.kind != "powerlaw"

    def describe(self) -> str:
        if self.kind == "powerlaw":
            return f"powerlaw(alpha={self.alpha!r}, xmin={self.xmin!r})"
        if self.kind == "constant":
            return f"constant({float(self.values[0])!r})"
        if self.kind == "two_point":
            return (
                f"two_point(low={float(self.values[0])!r}, "
                f"high={float(self.values[1])!r}, p={float(self.probs[1])!r})"
            )
        pairs = ", ".join(
            f"{float(v)!r}:{float(p)!r}" for v, p in zip(self.values, self.probs)
        )
        return f"table({pairs})"

    def mean(self) -> float:
        if self.is_atomic:
            return float(np.dot(self.values, self.probs))
        a, x = self.alpha, self.xmin
        return x * (a - 1.0) / (a - 2.0)

    def second_moment(self) -> float:
        if self.is_atomic:
            return float(np.dot(self.values**2, self.probs))
        a, x = self.alpha, self.xmin
        if a <= 3.0:
            return math.inf
        return x * x * (a - 1.0) / (a - 3.0)

    def ess_sup(self) -> float:
        if self.is_atomic:
            return float(self.values[-1])
        return math.inf

    def tail_prob(self, x) -> float:
        """P(w > x)."""
        if self.is_atomic:
            return float(self.probs[self.values > x].sum())
        if x <= self.xmin:
            return 1.0
        return (x / self.xmin) ** (1.0 - self.alpha)

    def tail_mean(self, x) -> float:
        """E[w 1{w > x}]."""
        if self.is_atomic:
            sel = self.values > x
            return float(np.dot(self.values[sel], self.probs[sel]))
        if x <= self.xmin:
            return self.mean()
        return self.mean() * (x / self.xmin) ** (2.0 - self.alpha)

    def sample(self, rng, size=None):
        """Draw weights. `rng` is a numpy Generator owned by the caller."""
        if self.kind == "constant":
            c = self.values[0]
            return c if size is None else np.full(size, c)
        if self.is_atomic:
            return rng.choice(self.values, size=size, p=self.probs)
        # Pareto inverse CDF
        u = rng.random(size)
        return self.xmin * (1.0 - u) ** (-1.0 / (self.alpha - 1.0))

    # -- mixed-Poisson building block -----------------------------------

    def _poisson_mixture_mass(self, k, bias):
        """E[w^bias e^{-w} w^k / k!], the core expectation behind the laws."""
        lgk = math.lgamma(k + 1)
        if self.is_atomic:
            w = self.values
            terms = np.exp(-w + (k + bias) * np.log(w) - lgk)
            return float(np.dot(terms, self.probs))
        a, xm = self.alpha, self.xmin
        norm = (a - 1.0) * xm ** (a - 1.0)

        def integrand(w):
            return math.exp(-w + (k + bias) * math.log(w) - lgk) * norm * w ** (-a)

        peak = max(k + bias, xm)
        hi = peak + 40.0 * math.sqrt(peak + 4.0) + 300.0
        pts = [min(max(float(k + bias), xm), hi)]
        val, _err = integrate.quad(
            integrand, xm, hi, points=pts, epsabs=1e-300, epsrel=_QUAD_RTOL, limit=300
        )
        return val


class ScaleFunction:
    """Named increasing function on the positive integers.

    Used to turn the seed-set size K into a search depth.  Built-ins:
    ``sqrt`` (k^0.5), ``identity`` (k), ``power(beta)`` for beta in (0, 1],
    ``log(c)`` meaning c*log(1+k), and an explicit table.
    """

    def __init__(self, kind, beta=None, coeff=None, table=None):
        self.kind = kind
        self.beta = beta
        self.coeff = coeff
        self.table = None
        if kind == "power":
            if not 0.0 < beta <= 1.0:
                raise ValueError("power exponent must lie in (0, 1]")
        elif kind == "log":
            if coeff <= 0:
                raise ValueError("log coefficient must be positive")
        elif kind == "table":
            tab = dict(table)
            ks = sorted(tab)
            vals = [float(tab[k]) for k in ks]
            if any(k < 1 for k in ks):
                raise ValueError("table keys must be positive integers")
            if any(v <= 0 for v in vals):
                raise ValueError("table values must be positive")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError("table must be strictly increasing")
            self.table = dict(zip(ks, vals))
        else:
            raise ValueError(f"unknown scale function kind {kind!r}")

    @classmethod
    def sqrt(cls):
        return cls("power", beta=0.5)

    @classmethod
    def identity(cls):
        return cls("power", beta=1.0)

    @classmethod
    def power(cls, beta):
        return cls("power", beta=beta)

    @classmethod
    def log(cls, coeff=1.0):
        return cls("log", coeff=coeff)

    @classmethod
    def from_table(cls, table):
        return cls("table", table=table)

    def __call__(self, k: int) -> float:
        if k < 1:
            raise ValueError("scale function is defined on k >= 1")
        if self.kind == "power":
            return float(k) ** self.beta
        if self.kind == "log":
            return self.coeff * math.log1p(k)
        try:
            return self.table[k]
        except KeyError:
            raise ValueError(f"scale table has no entry for k={k}") from None

    def describe(self) -> str:
        if self.kind == "power":
            if self.beta == 0.5:
                return "sqrt"
            if self.beta == 1.0:
                return "identity"
            return f"power({self.beta!r})"
        if self.kind == "log":
            return f"log({self.coeff!r})"
        pairs = ", ".join(f"{k}:{v!r}" for k, v in sorted(self.table.items()))
        return f"table({pairs})"


@dataclass(frozen=True)
class Truncation:
    """Capping parameters for the truncated offspring law.

    `epsilon` shaves a uniform factor off every mass at k >= 1, `cap`
    zeroes everything above it; the remainder lands at k = 0.  `cap=None`
    means no cap.
    """

    epsilon: float
    cap: int | None

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.cap is not None and self.cap < 1:
            raise ValueError("cap must be a positive integer or None")


@dataclass(frozen=True)
class WeightMoments:
    mean: float
    offspring_mean: float  # E(w^2)/E(w), the mean of the size-biased law
    finite: bool
    supercritical: bool


@dataclass(frozen=True)
class CapSelection:
    cap: int | None
    attained: bool
    mean_at_cap: float
    target: float


@dataclass(frozen=True)
class SearchBudgets:
    """Depth and consumption caps for one seed-set size K.

    depth = floor(K / sqrt(scale(3K))); a single exploration consumes at
    most (3K)^(depth+1) source vertices and a chained experiment K times
    that.  Caps are exact big integers; the overflow flags report whether
    they exceed signed 64-bit range.
    """

    K: int
    depth: int
    explore_cap: int
    experiment_cap: int
    explore_cap_overflows: bool
    experiment_cap_overflows: bool


@dataclass(frozen=True)
class TailBoundRow:
    k: int
    mass: float
    bound_value: float
    ok: bool


@dataclass(frozen=True)
class TailBoundReport:
    rows: tuple
    all_pass: bool


def moments(model: WeightModel) -> WeightMoments:
    """First moment of w and the mean of its size-biased Poisson offspring law.

    The offspring mean equals E(w^2)/E(w); it is flagged infinite for power
    laws with alpha <= 3.  ``supercritical`` reports offspring mean > 1.
    """
    mu = model.mean()
    m2 = model.second_moment()
    if math.isinf(m2):
        return WeightMoments(mu, math.inf, False, True)
    nu = m2 / mu
    return WeightMoments(mu, nu, True, nu > 1.0)


def degree_pmf(model: WeightModel, k: int) -> float:
    """P(degree = k) in the limit law of a uniform vertex: E[e^{-w} w^k / k!]."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return model._poisson_mixture_mass(k, bias=0)


def offspring_pmf(model: WeightModel, k: int) -> float:
    """Mass at k of the size-biased mixed-Poisson law: E[e^{-w} w^{k+1}/k!] / E(w)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return model._poisson_mixture_mass(k, bias=1) / model.mean()


def size_biased_sample(model: WeightModel, rng, size=None):
    """Draw from the size-biased weight law (density proportional to w f(w))."""
    if model.is_atomic:
        p = model.values * model.probs
        p = p / p.sum()
        return rng.choice(model.values, size=size, p=p)
    # size-biasing a Pareto(alpha) gives a Pareto(alpha - 1)
    u = rng.random(size)
    return model.xmin * (1.0 - u) ** (-1.0 / (model.alpha - 2.0))


def source_offspring_pmf(source_weights, total_weight, k: int) -> float:
    """Offspring mass at k for a concrete source set inside a larger graph.

    A mark is chosen from the source with probability proportional to its
    weight and reproduces as Poisson(w * ell_src / total_weight); this is the
    exact finite-population analogue of ``offspring_pmf``.  With the full
    weight vector as source it is the empirical offspring law of the graph.
    """
    w = np.asarray(source_weights, dtype=float)
    if w.size == 0:
        raise ValueError("source must be nonempty")
    ell_src = float(w.sum())
    if total_weight < ell_src - 1e-9 * ell_src:
        raise ValueError("total weight cannot be smaller than the source weight")
    lam = w * (ell_src / total_weight)
    logmass = -lam + k * np.log(lam) - math.lgamma(k + 1)
    return float(np.dot(np.exp(logmass), w) / ell_src)


def truncated_offspring_pmf(model: WeightModel, trunc: Truncation, k: int) -> float:
    """The capped offspring law: (1-eps) of the mass for 1 <= k <= cap, rest at 0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    eps, cap = trunc.epsilon, trunc.cap
    if k >= 1:
        if cap is not None and k > cap:
            return 0.0
        return (1.0 - eps) * offspring_pmf(model, k)
    if cap is None:
        kept = 1.0 - offspring_pmf(model, 0)
    else:
        kept = _offspring_partial_sum(model, cap, weight_by_k=False)
    return 1.0 - (1.0 - eps) * kept


def truncated_offspring_mean(model: WeightModel, trunc: Truncation) -> float:
    """Mean of the capped offspring law, (1-eps) * sum_{k<=cap} k g_k."""
    eps, cap = trunc.epsilon, trunc.cap
    if eps == 1.0:
        return 0.0
    if cap is None:
        mom = moments(model)
        return (1.0 - eps) * mom.offspring_mean
    return (1.0 - eps) * _offspring_partial_sum(model, cap, weight_by_k=True)


def _offspring_partial_sum(model, cap, weight_by_k):
    # sum_{k=1..cap} g_k or k*g_k; cap=None runs until the tail is negligible
    total = 0.0
    k = 1
    while True:
        if cap is not None and k > cap:
            break
        g = offspring_pmf(model, k)
        total += (k * g) if weight_by_k else g
        if cap is None and k > 4 and g * max(k, 1) < _TAIL_TOL:
            break
        if cap is None and k > 100000:
            raise RuntimeError("offspring tail did not decay; check the model")
        k += 1
    return total


def select_cap(model: WeightModel, eps: float = 0.05) -> CapSelection:
    """Smallest cap whose truncated offspring mean still clears the midpoint.

    The target is (1 + nu)/2 with nu the untruncated offspring mean; a
    supercritical law stays supercritical after a mild truncation exactly
    when this margin is attainable.  Returns an unattained flag instead of
    raising when eps is too aggressive.
    """
    mom = moments(model)
    if not mom.finite:
        raise ValueError("offspring mean is infinite; no finite target exists")
    if mom.offspring_mean <= 1.0:
        raise ValueError("offspring mean must exceed 1")
    nu = mom.offspring_mean
    target = (1.0 + nu) / 2.0
    limit = (1.0 - eps) * nu
    if limit <= target:
        return CapSelection(None, False, limit, target)
    running = 0.0
    k = 1
    while True:
        running += k * offspring_pmf(model, k)
        if (1.0 - eps) * running >= target:
            return CapSelection(k, True, (1.0 - eps) * running, target)
        if k > 100000:
            raise RuntimeError("cap search did not terminate; offspring tail too slow")
        k += 1


def search_budgets(K: int, scale: ScaleFunction) -> SearchBudgets:
    if K < 1:
        raise ValueError("K must be >= 1")
    depth = math.floor(K / math.sqrt(scale(3 * K)))
    explore_cap = (3 * K) ** (depth + 1)
    experiment_cap = K * explore_cap
    return SearchBudgets(
        K,
        depth,
        explore_cap,
        experiment_cap,
        explore_cap > _INT64_MAX,
        experiment_cap > _INT64_MAX,
    )


def star_hold_exponent(lam: float) -> float:
    """Per-leaf exponential rate at which a star retains infection.

    Computed as min(lam, 1/2)^2 / |log min(lam, 1/2)|; a star with M leaves
    holds the infection for a time of order exp(rate * M).
    """
    if lam <= 0:
        raise ValueError("infection rate must be positive")
    lb = min(lam, 0.5)
    return lb * lb / abs(math.log(lb))


def _tail_bound_row(mass, k, scale):
    bound = mass * math.exp(k / scale(k))
    return TailBoundRow(k, mass, bound, bound >= 1.0)


def offspring_tail_report(model: WeightModel, scale: ScaleFunction, k_max: int) -> TailBoundReport:
    """Check the lower tail bound mass * e^{k/scale(k)} >= 1 for 1 <= k <= k_max.

    The bound is an asymptotic modelling hypothesis; finite machines can only
    check a prefix, so the verdict is relative to k_max.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    rows = tuple(
        _tail_bound_row(offspring_pmf(model, k), k, scale) for k in range(1, k_max + 1)
    )
    return TailBoundReport(rows, all(r.ok for r in rows))


def removal_tolerance(model: WeightModel, delta: float) -> tuple[float, float]:
    """Cutoff x and vertex fraction protecting a (1 - delta) share of total weight.

    For bounded models the fraction is mean*delta / (2 * ess_sup).  For
    unbounded models, x is the smallest point on a geometric grid of ratio
    1.01 with E[w 1{w > x}] <= mean*delta/2, and the fraction is P(w > x)/2.
    Any vertex set no larger than that fraction of n then carries at most a
    delta/2 share of the expected total weight.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    mu = model.mean()
    if model.ess_sup() < math.inf:
        top = model.ess_sup()
        return top, mu * delta / (2.0 * top)
    target = mu * delta / 2.0
    x = model.xmin
    for _ in range(10**6):
        if model.tail_mean(x) <= target:
            return x, model.tail_prob(x) / 2.0
        x *= 1.01
    raise RuntimeError("tail-mean grid search did not terminate")
