"""Tests for weight models and the derived offspring machinery.

Reference values for the power-law expectations were frozen from an
independent oracle: dense trapezoid quadrature of the defining integrals on
a uniform grid of 4e6 points (see _trapezoid_mixture_mass below, which
recomputes a spot-check subset at test time).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cplab import weights as wl
from cplab.weights import (
    ScaleFunction,
    Truncation,
    WeightModel,
    degree_pmf,
    moments,
    offspring_pmf,
    offspring_tail_report,
    removal_tolerance,
    search_budgets,
    select_cap,
    size_biased_sample,
    source_offspring_pmf,
    star_hold_exponent,
    truncated_offspring_mean,
    truncated_offspring_pmf,
)


def _trapezoid_mixture_mass(alpha, xmin, k, bias, n_pts=2_000_001):
    # independent quadrature route: fixed uniform grid, trapezoid rule
    peak = max(k + bias, xmin)
    hi = peak + 60.0 * math.sqrt(peak + 4.0) + 400.0
    w = np.linspace(xmin, hi, n_pts)
    lg = math.lgamma(k + 1)
    dens = (alpha - 1.0) * xmin ** (alpha - 1.0) * w ** (-alpha)
    f = np.exp(-w + (k + bias) * np.log(w) - lg) * dens
    return float(np.trapezoid(f, w))


# -- model construction and validation ---------------------------------


def test_model_validation():
    with pytest.raises(ValueError):
        WeightModel.powerlaw(2.0)  # infinite mean boundary
    with pytest.raises(ValueError):
        WeightModel.powerlaw(2.5, xmin=0.5)  # support must start at >= 1
    with pytest.raises(ValueError):
        WeightModel.constant(0.5)
    with pytest.raises(ValueError):
        WeightModel.two_point(1, 3, 1.5)
    with pytest.raises(ValueError):
        WeightModel.table([1, 2], [0.7, 0.7])
    with pytest.raises(ValueError):
        WeightModel.table([1, 2], [0.5])


def test_scale_function_validation():
    with pytest.raises(ValueError):
        ScaleFunction.power(1.5)
    with pytest.raises(ValueError):
        ScaleFunction.log(0.0)
    with pytest.raises(ValueError):
        ScaleFunction.from_table({1: 2.0, 2: 2.0})  # not strictly increasing
    f = ScaleFunction.from_table({1: 1.0, 3: 2.0})
    with pytest.raises(ValueError):
        f(2)


def test_truncation_validation():
    with pytest.raises(ValueError):
        Truncation(-0.1, None)
    with pytest.raises(ValueError):
        Truncation(0.1, 0)
    Truncation(0.0, None)  # no-op truncation is legal


# -- moments -----------------------------------------------------------


def test_moments_constant():
    m = moments(WeightModel.constant(3))
    assert m.mean == 3.0
    assert m.offspring_mean == 3.0
    assert m.finite and m.supercritical


def test_moments_two_point():
    m = moments(WeightModel.two_point(1, 3, 0.5))
    assert m.mean == 2.0
    assert m.offspring_mean == pytest.approx(2.5)
    assert m.supercritical


def test_moments_critical_boundary():
    m = moments(WeightModel.constant(1))
    assert m.mean == 1.0 and m.offspring_mean == 1.0
    assert not m.supercritical


def test_moments_powerlaw():
    # alpha <= 3 has infinite second moment
    m = moments(WeightModel.powerlaw(2.5))
    assert m.mean == pytest.approx(3.0)
    assert math.isinf(m.offspring_mean) and not m.finite and m.supercritical
    m = moments(WeightModel.powerlaw(3.5))
    assert m.offspring_mean == pytest.approx(3.0)


# -- degree law --------------------------------------------------------


def test_degree_pmf_constant():
    model = WeightModel.constant(1)
    assert degree_pmf(model, 0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert degree_pmf(model, 2) == pytest.approx(math.exp(-1) / 2, abs=1e-12)


def test_degree_pmf_powerlaw_against_quadrature_oracle():
    model = WeightModel.powerlaw(2.5, 1.0)
    # frozen from the trapezoid oracle (Richardson-extrapolated 8e6-point grid)
    assert degree_pmf(model, 0) == pytest.approx(0.189731729390, abs=2e-9)
    assert degree_pmf(model, 1) == pytest.approx(0.267221567672, abs=2e-9)
    assert degree_pmf(model, 2) == pytest.approx(0.209104188960, abs=2e-9)
    # live spot check with a coarser independent grid
    assert degree_pmf(model, 3) == pytest.approx(
        _trapezoid_mixture_mass(2.5, 1.0, 3, 0), abs=1e-8
    )


# -- offspring law -----------------------------------------------------


def test_offspring_pmf_constant_matches_degree_law():
    # size-biasing a constant is a no-op
    model = WeightModel.constant(2)
    for k in range(8):
        assert offspring_pmf(model, k) == pytest.approx(degree_pmf(model, k), abs=1e-14)


def test_offspring_pmf_two_point_hand_value():
    model = WeightModel.two_point(1, 3, 0.5)
    expect = (0.5 * math.exp(-1) + 0.5 * 3 * math.exp(-3)) / 2.0
    assert offspring_pmf(model, 0) == pytest.approx(expect, abs=1e-14)


def test_offspring_pmf_powerlaw_frozen():
    model = WeightModel.powerlaw(2.5, 1.0)
    assert offspring_pmf(model, 0) == pytest.approx(0.089073855891, abs=2e-9)
    assert offspring_pmf(model, 1) == pytest.approx(0.139402792640, abs=2e-9)
    assert offspring_pmf(model, 5) == pytest.approx(0.048052007976, abs=2e-9)


def test_offspring_pmf_normalizes():
    for model in (WeightModel.constant(2), WeightModel.two_point(1, 3, 0.5)):
        total = sum(offspring_pmf(model, k) for k in range(201))
        assert total == pytest.approx(1.0, abs=1e-8)


@given(
    vals=st.lists(st.floats(1.0, 20.0), min_size=1, max_size=4, unique=True),
    raw=st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4),
)
@settings(max_examples=40, deadline=None)
def test_pmf_bounds_and_mass(vals, raw):
    probs = np.array(raw[: len(vals)])
    probs = probs / probs.sum()
    model = WeightModel.table(vals, probs)
    masses = [offspring_pmf(model, k) for k in range(80)]
    assert all(0.0 <= m <= 1.0 for m in masses)
    assert sum(masses) == pytest.approx(1.0, abs=1e-6)
    assert all(0.0 <= degree_pmf(model, k) <= 1.0 for k in range(10))


def test_size_bias_two_routes_agree():
    # route A: bias-1 expectation; route B: plain degree law of the
    # reweighted atom model.  The two must coincide identically in law.
    model = WeightModel.two_point(1, 3, 0.5)
    sb_probs = model.values * model.probs / model.mean()
    sb_model = WeightModel.table(model.values, sb_probs)
    for k in range(25):
        assert offspring_pmf(model, k) == pytest.approx(
            degree_pmf(sb_model, k), abs=1e-12
        )


def test_offspring_mean_consistency():
    for model in (WeightModel.constant(2.5), WeightModel.two_point(1, 4, 0.3)):
        direct = sum(k * offspring_pmf(model, k) for k in range(250))
        assert direct == pytest.approx(moments(model).offspring_mean, abs=1e-6)


# -- size-biased sampling ----------------------------------------------


def test_size_biased_sample_constant():
    rng = np.random.default_rng(0)
    assert np.all(size_biased_sample(WeightModel.constant(2), rng, size=50) == 2.0)


def test_size_biased_sample_two_point_frequency():
    rng = np.random.default_rng(7)
    draws = size_biased_sample(WeightModel.two_point(1, 3, 0.5), rng, size=100_000)
    # P(w* = 3) = 3*0.5/2 = 0.75
    assert np.mean(draws == 3.0) == pytest.approx(0.75, abs=0.01)


def test_size_biased_sample_powerlaw_median():
    # size-biasing Pareto(4) gives Pareto(3), whose median is sqrt(2)
    rng = np.random.default_rng(11)
    draws = size_biased_sample(WeightModel.powerlaw(4.0), rng, size=200_000)
    assert np.median(draws) == pytest.approx(math.sqrt(2.0), abs=0.01)


# -- finite-population offspring law -----------------------------------


def test_source_offspring_single_atom():
    assert source_offspring_pmf([1.0], 1.0, 0) == pytest.approx(math.exp(-1), abs=1e-14)


def test_source_offspring_two_atoms_in_larger_graph():
    # each mark reproduces as Poisson(1 * 2 / 4)
    assert source_offspring_pmf([1.0, 1.0], 4.0, 0) == pytest.approx(
        math.exp(-0.5), abs=1e-14
    )


def test_source_offspring_full_population_converges():
    # empirical law of 1e5 i.i.d. power-law weights vs the limit law
    rng = np.random.default_rng(3)
    model = WeightModel.powerlaw(2.5, 1.0)
    w = model.sample(rng, size=100_000)
    ell = float(w.sum())
    for k in range(11):
        emp = source_offspring_pmf(w, ell, k)
        assert abs(emp - offspring_pmf(model, k)) < 0.01


def test_source_offspring_rejects_bad_total():
    with pytest.raises(ValueError):
        source_offspring_pmf([2.0, 2.0], 1.0, 0)
    with pytest.raises(ValueError):
        source_offspring_pmf([], 1.0, 0)


# -- truncation --------------------------------------------------------


def test_truncation_limit_is_identity():
    model = WeightModel.two_point(1, 3, 0.5)
    t = Truncation(0.0, None)
    for k in range(12):
        assert truncated_offspring_pmf(model, t, k) == pytest.approx(
            offspring_pmf(model, k), abs=1e-12
        )


def test_truncation_direct_formula():
    # eps=0.5, cap=1 leaves half of g_1 at 1 and the rest at 0
    model = WeightModel.constant(2)
    g1 = offspring_pmf(model, 1)
    t = Truncation(0.5, 1)
    assert truncated_offspring_pmf(model, t, 1) == pytest.approx(0.5 * g1, abs=1e-12)
    assert truncated_offspring_pmf(model, t, 0) == pytest.approx(1 - 0.5 * g1, abs=1e-12)
    assert truncated_offspring_pmf(model, t, 2) == 0.0


def test_truncated_mass_normalizes():
    model = WeightModel.two_point(1, 3, 0.5)
    t = Truncation(0.2, 6)
    total = sum(truncated_offspring_pmf(model, t, k) for k in range(8))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_truncated_mean_matches_pmf_sum():
    model = WeightModel.two_point(1, 3, 0.5)
    t = Truncation(0.1, 9)
    via_pmf = sum(k * truncated_offspring_pmf(model, t, k) for k in range(10))
    assert truncated_offspring_mean(model, t) == pytest.approx(via_pmf, abs=1e-12)


def test_truncated_mean_edge_cases():
    model = WeightModel.two_point(1, 3, 0.5)
    assert truncated_offspring_mean(model, Truncation(1.0, None)) == 0.0
    assert truncated_offspring_mean(model, Truncation(0.0, None)) == pytest.approx(
        2.5, abs=1e-9
    )
    # bounded weights: tail of g beyond 50 is negligible
    assert truncated_offspring_mean(model, Truncation(0.1, 50)) == pytest.approx(
        0.9 * 2.5, abs=1e-6
    )


@given(
    eps=st.floats(0.0, 0.9),
    eps2=st.floats(0.0, 0.9),
    cap=st.integers(1, 12),
    cap2=st.integers(1, 12),
)
@settings(max_examples=30, deadline=None)
def test_truncation_monotonicity(eps, eps2, cap, cap2):
    model = WeightModel.two_point(1, 3, 0.5)
    lo_e, hi_e = sorted((eps, eps2))
    lo_k, hi_k = sorted((cap, cap2))
    # pointwise mass at k >= 1 shrinks as eps grows
    for k in (1, 3, 5):
        assert truncated_offspring_pmf(model, Truncation(hi_e, lo_k), k) <= (
            truncated_offspring_pmf(model, Truncation(lo_e, lo_k), k) + 1e-15
        )
    # mean grows with cap, shrinks with eps
    assert truncated_offspring_mean(model, Truncation(lo_e, lo_k)) <= (
        truncated_offspring_mean(model, Truncation(lo_e, hi_k)) + 1e-12
    )
    assert truncated_offspring_mean(model, Truncation(hi_e, lo_k)) <= (
        truncated_offspring_mean(model, Truncation(lo_e, lo_k)) + 1e-12
    )


# -- cap selection -----------------------------------------------------


def test_select_cap_constant4():
    # target is (1 + 4)/2 = 2.5; frozen from a scan of the Poisson(4) law
    sel = select_cap(WeightModel.constant(4), eps=0.01)
    assert sel.attained and sel.cap == 6
    assert sel.mean_at_cap == pytest.approx(3.109116332640, abs=1e-9)
    below = truncated_offspring_mean(WeightModel.constant(4), Truncation(0.01, 5))
    assert below < sel.target <= sel.mean_at_cap


def test_select_cap_two_point():
    sel = select_cap(WeightModel.two_point(1, 3, 0.5), eps=0.05)
    assert sel.attained and sel.cap == 5


def test_select_cap_rejects_subcritical():
    with pytest.raises(ValueError):
        select_cap(WeightModel.constant(1), eps=0.05)


def test_select_cap_unattainable():
    # (1 - 0.9) * nu < (1 + nu)/2 for nu = 1.2, so no cap can work
    sel = select_cap(WeightModel.constant(1.2), eps=0.9)
    assert not sel.attained and sel.cap is None


# -- search budgets ----------------------------------------------------


def test_search_budgets_worked_examples():
    b = search_budgets(12, ScaleFunction.identity())
    assert (b.depth, b.explore_cap, b.experiment_cap) == (2, 46656, 559872)
    assert not b.explore_cap_overflows and not b.experiment_cap_overflows
    b = search_budgets(1, ScaleFunction.identity())
    assert (b.depth, b.explore_cap, b.experiment_cap) == (0, 3, 3)


def test_search_budgets_overflow_flag():
    b = search_budgets(50, ScaleFunction.log(1.0))
    assert b.explore_cap_overflows and b.experiment_cap_overflows
    assert b.explore_cap == 150 ** (b.depth + 1)  # exact wide arithmetic


@given(k=st.integers(1, 200), beta=st.floats(0.1, 0.9))
@settings(max_examples=60, deadline=None)
def test_search_budget_arithmetic(k, beta):
    phi = ScaleFunction.power(beta)
    b = search_budgets(k, phi)
    assert b.depth == math.floor(k / math.sqrt(phi(3 * k)))
    assert b.explore_cap == (3 * k) ** (b.depth + 1)
    assert b.experiment_cap == k * b.explore_cap
    # depth never shrinks with K for sublinear scale functions
    b2 = search_budgets(k + 1, phi)
    assert b2.depth >= b.depth


# -- star hold exponent ------------------------------------------------


def test_star_hold_exponent_values():
    assert star_hold_exponent(0.5) == pytest.approx(0.25 / math.log(2), abs=1e-9)
    assert star_hold_exponent(2.0) == star_hold_exponent(0.5)  # capped at 1/2
    assert star_hold_exponent(0.1) == pytest.approx(0.01 / math.log(10), abs=1e-9)
    with pytest.raises(ValueError):
        star_hold_exponent(0.0)


# -- offspring tail report ---------------------------------------------


def test_tail_report_powerlaw_sqrt():
    # the bound mass * e^(k/sqrt(k)) >= 1 fails at every k <= 30 here:
    # g_1 * e ~ 0.38 and the polynomial tail only wins out near k ~ 40
    rep = offspring_tail_report(WeightModel.powerlaw(2.5), ScaleFunction.sqrt(), 30)
    assert not rep.all_pass
    assert not rep.rows[0].ok
    assert all(not r.ok for r in rep.rows)


def test_tail_report_constant_log():
    # Poisson tails decay super-exponentially; the bound dies at k = 5
    rep = offspring_tail_report(WeightModel.constant(2), ScaleFunction.log(1.0), 30)
    assert not rep.all_pass
    oks = [r.ok for r in rep.rows]
    assert oks[:4] == [True, True, True, True]
    assert not any(oks[4:])


def test_tail_report_window_where_bound_holds():
    # same power law, generous log scale: holds on an initial window
    rep = offspring_tail_report(WeightModel.powerlaw(2.5), ScaleFunction.log(0.2), 10)
    assert rep.rows[0].k == 1 and len(rep.rows) == 10


def test_tail_report_zero_mass_fails():
    # a table model whose weight sits far out makes small-k mass tiny
    rep = offspring_tail_report(WeightModel.constant(40), ScaleFunction.identity(), 3)
    assert not rep.rows[0].ok


# -- removal tolerance -------------------------------------------------


def test_removal_tolerance_bounded():
    # constant c: mean = ess-sup = c, so the fraction is delta/2
    x, frac = removal_tolerance(WeightModel.constant(3), 0.1)
    assert x == 3.0
    assert frac == pytest.approx(0.05, abs=1e-12)


def test_removal_tolerance_powerlaw_frozen():
    # tail-mean equation 2/x <= 0.1 on the 1.01 grid: x = 1.01^302
    model = WeightModel.powerlaw(3.0, 1.0)
    x, frac = removal_tolerance(model, 0.1)
    assert x == pytest.approx(1.01**302, rel=1e-12)
    assert frac == pytest.approx(0.001227044292, abs=1e-9)
    # defining inequality, and minimality on the grid
    mu = model.mean()
    assert model.tail_mean(x) <= mu * 0.1 / 2
    assert model.tail_mean(x / 1.01) > mu * 0.1 / 2


def test_removal_tolerance_monotone_in_delta():
    model = WeightModel.powerlaw(3.0, 1.0)
    x1, f1 = removal_tolerance(model, 0.1)
    x2, f2 = removal_tolerance(model, 0.5)
    assert x2 <= x1 and f2 >= f1


def test_removal_tolerance_rejects_bad_delta():
    with pytest.raises(ValueError):
        removal_tolerance(WeightModel.constant(2), 0.0)


# -- parsing hooks used by the config layer ----------------------------


def test_describe_round_trips_visually():
    assert WeightModel.powerlaw(2.5, 1.0).describe() == "powerlaw(alpha=2.5, xmin=1.0)"
    assert WeightModel.constant(2.0).describe() == "constant(2.0)"
    assert (
        WeightModel.two_point(1.0, 5.0, 0.25).describe()
        == "two_point(low=1.0, high=5.0, p=0.25)"
    )
    assert WeightModel.table([1.0, 3.0], [0.5, 0.5]).describe() == "table(1.0:0.5, 3.0:0.5)"
    assert ScaleFunction.sqrt().describe() == "sqrt"
    assert ScaleFunction.identity().describe() == "identity"
    assert ScaleFunction.log(2.0).describe() == "log(2.0)"
