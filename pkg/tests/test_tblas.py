import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from onoffnet.errors import BracketError, ConfigurationError, DomainError, OutOfRegimeError
from onoffnet.fading import FadingSpec
from onoffnet.tblas import (
    SlackRule,
    ThresholdPolicy,
    achievable_throughput,
    activate,
    first_order_correction,
    golden_section_max,
    optimize_threshold,
    rayleigh_asymptotics,
    solve_zero_order,
    threshold_for,
    zero_order_residual,
)

IDEAL = ThresholdPolicy.idealized()


def dense_grid_argmax(n, points=2_000_001):
    """Brute-force maximizer of n e^-d log(1 + d e^d / n) on a fine uniform grid."""
    d = np.linspace(1e-3, math.log(n) + 3, points)
    v = n * np.exp(-d) * np.log1p(d * np.exp(d) / n)
    return d[np.argmax(v)], d[1] - d[0]


def brentq_root(n):
    return brentq(lambda d: 2 * n * math.exp(-d) - 2 * d - d * d, 0, math.log(n) + 3, xtol=1e-14)


# --- activation -------------------------------------------------------------


def test_activate_direct_rule():
    assert activate([0.5, 2.0, 1.5], 1.0) == (1, 2)


def test_activate_zero_threshold_keeps_positive_gains():
    assert activate([0.1, 3.0, 1e-9], 0.0) == (0, 1, 2)


def test_activate_tie_stays_silent():
    g = [0.5, 2.0, 1.5]
    assert activate(g, max(g)) == ()
    assert activate([1.0, 1.0], 1.0) == ()


def test_activate_rejects_negative_gains():
    with pytest.raises(DomainError):
        activate([1.0, -0.5], 0.0)


@given(st.lists(st.floats(0, 20), min_size=1, max_size=30), st.floats(0, 20), st.floats(0, 20))
def test_activation_sets_nest(gains, a, b):
    lo, hi = sorted((a, b))
    assert set(activate(gains, hi)) <= set(activate(gains, lo))


@settings(max_examples=50)
@given(st.integers(2, 8), st.floats(0, 5), st.integers(0, 2**32 - 1))
def test_activation_ignores_cross_gains(n, delta, seed):
    rng = np.random.default_rng(seed)
    G = rng.exponential(size=(n, n))
    H = rng.exponential(size=(n, n))
    np.fill_diagonal(H, np.diag(G))
    assert activate(np.diag(G), delta) == activate(np.diag(H), delta)


# --- achievable throughput -------------------------------------------------


def test_achievable_throughput_worked_value():
    m = 1000 * math.exp(-4.3)
    assert m == pytest.approx(13.569, abs=1e-3)
    assert achievable_throughput(1000, 4.3, IDEAL) == pytest.approx(m * math.log1p(4.3 / m), rel=1e-14)
    assert achievable_throughput(1000, 4.3, IDEAL) == pytest.approx(3.735, abs=1e-3)


def test_achievable_throughput_zero_threshold():
    assert achievable_throughput(1000, 0.0, IDEAL) == 0.0


def test_out_of_regime_threshold():
    n = 1000
    with pytest.raises(OutOfRegimeError):
        achievable_throughput(n, 2 * math.log(n), ThresholdPolicy())


@pytest.mark.parametrize("delta", [0.5, 2.0, 4.3, 6.0])
def test_idealized_objective_matches_rayleigh_closed_form(delta):
    n = 1000
    expected = n * math.exp(-delta) * math.log1p(delta * math.exp(delta) / n)
    assert achievable_throughput(n, delta, IDEAL) == pytest.approx(expected, rel=1e-13)


def test_slack_rules_enter_the_bound():
    n, d = 10_000, 5.0
    pol = ThresholdPolicy(xi=1.0, psi=2.0)
    nq = n * math.exp(-d)
    m = nq - math.sqrt(nq)
    assert achievable_throughput(n, d, pol) == pytest.approx(m * math.log1p(d / (m + 2.0)), rel=1e-14)


def test_general_mean_enters_the_bound():
    n, d, mu = 10_000, 8.0, 2.0
    pol = ThresholdPolicy.idealized(FadingSpec.exponential(mu))
    m = n * math.exp(-d / mu)
    assert achievable_throughput(n, d, pol) == pytest.approx(m * math.log1p(d / (mu * m)), rel=1e-13)


def test_default_slack_rules():
    n = 10**4
    pol = ThresholdPolicy()
    assert pol.xi(n) == pytest.approx(math.sqrt(math.log(math.log(n))))
    assert pol.psi(n) == pytest.approx(math.log(n))
    with pytest.raises(ConfigurationError):
        SlackRule("cubic")
    with pytest.raises(ConfigurationError):
        SlackRule.of(-1.0)


# --- threshold optimization -------------------------------------------------


@pytest.mark.parametrize("n", [1000, 10**6])
def test_optimizer_matches_dense_grid_oracle(n):
    d_oracle, step = dense_grid_argmax(n)
    sol = optimize_threshold(n, IDEAL)
    assert sol.method == "grid+golden"
    assert abs(sol.delta - d_oracle) <= 2 * step + 1e-6
    assert sol.throughput == pytest.approx(achievable_throughput(n, sol.delta, IDEAL), rel=1e-12)
    assert sol.k_pred == pytest.approx(n * math.exp(-sol.delta), rel=1e-12)


@pytest.mark.parametrize("n", [10, 1000, 10**5])
@pytest.mark.parametrize("policy", [IDEAL, ThresholdPolicy()], ids=["ideal", "defaults"])
def test_optimizer_beats_every_grid_point(n, policy):
    sol = optimize_threshold(n, policy)
    grid = np.geomspace(1e-4, math.log(n) + 3, 4000)
    for d in grid:
        try:
            v = achievable_throughput(n, d, policy)
        except OutOfRegimeError:
            continue
        assert sol.throughput >= v - 1e-12


def test_optimizer_needs_n_at_least_three():
    with pytest.raises(DomainError):
        optimize_threshold(2, IDEAL)


def test_optimizer_reports_all_out_of_regime():
    with pytest.raises(ConfigurationError):
        optimize_threshold(3, ThresholdPolicy(xi=100.0))


def test_optimizer_gap_to_zero_order_root_shrinks():
    # both maximize the same function up to a second-order expansion of log(1+x)
    gaps = [abs(optimize_threshold(n, IDEAL).delta - solve_zero_order(n)) for n in (10**3, 10**6, 10**9, 10**12)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_golden_section_finds_parabola_peak():
    x, v = golden_section_max(lambda t: -(t - 1.234) ** 2, 0.0, 3.0, tol=1e-12)
    assert x == pytest.approx(1.234, abs=1e-9) and v == pytest.approx(0.0, abs=1e-15)


# --- zero-order solver ------------------------------------------------------


@pytest.mark.parametrize("n, approx", [(1000, 4.300), (10**6, 9.765), (10**9, 15.78)])
def test_zero_order_root(n, approx):
    d = solve_zero_order(n)
    assert d == pytest.approx(brentq_root(n), abs=1e-11)
    assert d == pytest.approx(approx, abs=5e-3)
    assert abs(zero_order_residual(n, d)) < 1e-9


def test_zero_order_huge_n_through_log_domain():
    n = 10**300
    d = solve_zero_order(n)
    assert math.isfinite(d) and abs(zero_order_residual(n, d)) < 1e-9 * (2 * d + d * d)
    d_big = solve_zero_order(10**400)
    assert d_big > d


def test_zero_order_bracket_and_domain():
    with pytest.raises(DomainError):
        solve_zero_order(2)


def test_zero_order_bracket_always_changes_sign():
    # for n >= 3 the residual is positive at 0 and negative at log n + 3
    for n in (3, 4, 10, 10**50):
        assert zero_order_residual(n, 0.0) > 0 > zero_order_residual(n, math.log(n) + 3)
    assert issubclass(BracketError, ValueError)


def test_zero_order_consistency_with_leading_terms():
    raw, scaled = [], []
    for e in range(3, 13):
        n = 10**e
        L = math.log(n)
        LL = math.log(L)
        err = abs(solve_zero_order(n) - (L - 2 * LL + math.log(2)))
        raw.append(err)
        scaled.append(err * L / LL)
    assert max(scaled) < 10
    # the plain error is what vanishes at rate log log n / log n
    assert all(b < a for a, b in zip(raw[2:], raw[3:]))


# --- Rayleigh closed forms --------------------------------------------------


def test_rayleigh_asymptotics_at_e10():
    a = rayleigh_asymptotics(math.exp(10))
    assert a.delta == pytest.approx(10 - 2 * math.log(10) + math.log(2), rel=1e-14)
    assert a.delta == pytest.approx(6.0880, abs=1e-4)
    assert a.k == pytest.approx(50.0, rel=1e-14)
    assert a.rbar == pytest.approx(0.2, rel=1e-14)
    assert a.throughput == pytest.approx(a.delta - 1, rel=1e-14)


def test_rayleigh_asymptotics_huge_n():
    a = rayleigh_asymptotics(10**300)
    assert math.isfinite(a.delta) and a.k > 0


@pytest.mark.parametrize("f", [rayleigh_asymptotics, first_order_correction])
def test_asymptotic_domain(f):
    with pytest.raises(DomainError):
        f(15)


def test_first_order_correction_at_e10():
    d1, err = first_order_correction(math.exp(10), 0.0)
    assert d1 == pytest.approx(6.0880 + 4 * math.log(10) / 10, abs=1e-4)
    assert d1 == pytest.approx(7.009, abs=1e-3)
    assert err == 0.0
    assert first_order_correction(math.exp(10), 1.0)[1] == pytest.approx(0.1)


@given(st.integers(16, 10**15))
def test_first_order_exceeds_zero_order_leading_term(n):
    assert first_order_correction(n)[0] > rayleigh_asymptotics(n).delta


@pytest.mark.parametrize("method", ["zero-order", "first-order", "asymptotic"])
def test_threshold_for_closed_forms(method):
    sol = threshold_for(10**4, IDEAL, method)
    assert sol.method == method
    assert sol.throughput == pytest.approx(achievable_throughput(10**4, sol.delta, IDEAL))


def test_closed_forms_refuse_non_rayleigh():
    pol = ThresholdPolicy.idealized(FadingSpec.exponential(2.0))
    with pytest.raises(ConfigurationError):
        threshold_for(10**4, pol, "zero-order")
    assert threshold_for(10**4, pol, "grid+golden").delta > 0
