"""
Unit tests for the Mittag-Leffler function and the limit laws built on it.
"""

import math

import mpmath
import numpy as np
import pandas as pd
import pytest
from scipy.special import erfcx
from scipy.special import gamma as gamma_fn
from scipy.stats import poisson

from app import settings
from app.services import limits
from app.services.errors import BankMissingError, ParameterError, PrecisionError
from app.services.model import mda_for
from app.services.rng import exponential, pareto
from app.services.stats import EcdfBank


# --- Helpers ---

GUMBEL = mda_for(exponential(1.0))


def extended_series(alpha: float, x: float) -> float:
    """E_alpha(-x) from the power series in 90-digit arithmetic."""
    with mpmath.workdps(90):
        a, z = mpmath.mpf(alpha), mpmath.mpf(-x)
        total, n = mpmath.mpf(0), 0
        while True:
            term = z**n / mpmath.gamma(1 + n * a)
            total += term
            if n > x ** (1.0 / alpha) / alpha and abs(term) < mpmath.mpf(10) ** -40:
                return float(total)
            n += 1


@pytest.fixture(scope="module")
def w_bank() -> EcdfBank:
    return limits.hitting_time_bank(0.5, 10**5, seed=71)


# --- Mittag-Leffler ---

@pytest.mark.parametrize("z", [0.0, 0.5, 2.0, 5.0])
def test_mittag_leffler_order_one_is_exponential(z):
    """E_1(-z) = exp(-z)."""
    assert limits.mittag_leffler_fn(1.0, -z) == pytest.approx(math.exp(-z), rel=1e-10)


@pytest.mark.parametrize("z", np.linspace(0.0, 3.0, 7))
def test_mittag_leffler_half_is_erfcx(z):
    """E_{1/2}(-z) = exp(z**2) erfc(z)."""
    assert abs(limits.mittag_leffler_fn(0.5, -z) - erfcx(z)) < 1e-8


def test_mittag_leffler_vectorized():
    """Arrays in, arrays out."""
    zs = np.array([0.0, -1.0, -2.0])
    assert limits.mittag_leffler_fn(0.5, zs) == pytest.approx(erfcx(-zs), abs=1e-10)


def test_mittag_leffler_derivative_order_one():
    """E'_1(z) = exp(z)."""
    assert limits.mittag_leffler_derivative(1.0, -2.0) == pytest.approx(math.exp(-2.0), rel=1e-10)


def test_mittag_leffler_derivative_half():
    """The derivative series matches a central difference of E_{1/2}."""
    z, h = -1.2, 1e-5
    diff = (limits.mittag_leffler_fn(0.5, z + h) - limits.mittag_leffler_fn(0.5, z - h)) / (2 * h)
    assert limits.mittag_leffler_derivative(0.5, z) == pytest.approx(diff, rel=1e-6)


def test_mittag_leffler_rejects_positive_argument():
    """Only z <= 0 is supported."""
    with pytest.raises(ParameterError):
        limits.mittag_leffler_fn(0.5, 1.0)


def test_mittag_leffler_precision_error(monkeypatch):
    """Cancellation beyond the digit budget raises PrecisionError."""
    monkeypatch.setattr(settings, "ML_MAX_DIGITS", 30)
    limits._mittag_leffler_scalar.cache_clear()
    try:
        with pytest.raises(PrecisionError):
            limits.mittag_leffler_fn(0.5, -5.0)
    finally:
        limits._mittag_leffler_scalar.cache_clear()


@pytest.mark.parametrize("z", [40.0, 200.0])
def test_mittag_leffler_large_argument_is_erfcx(z):
    """Far past the power series range E_{1/2}(-z) still equals erfcx(z)."""
    assert limits.mittag_leffler_fn(0.5, -z) == pytest.approx(erfcx(z), rel=1e-12)


def test_mittag_leffler_derivative_large_argument():
    """E'_{1/2}(-40) = 2/sqrt(pi) - 80 erfcx(40)."""
    expected = 2.0 / math.sqrt(math.pi) - 80.0 * erfcx(40.0)
    assert limits.mittag_leffler_derivative(0.5, -40.0) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("alpha, x", [(0.3, 4.0), (0.7, 15.0)])
def test_mittag_leffler_large_argument_matches_extended_series(alpha, x):
    """The large-argument expansion agrees with the power series summed at 80 digits."""
    assert limits.mittag_leffler_fn(alpha, -x) == pytest.approx(extended_series(alpha, x), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_mittag_leffler_leading_decay(alpha):
    """E_alpha(-x) ~ 1 / (x Gamma(1 - alpha)) for large x."""
    x = 1e4
    assert limits.mittag_leffler_fn(alpha, -x) == pytest.approx(1.0 / (x * gamma_fn(1.0 - alpha)), rel=1e-3)


# --- Max and k-th order laws ---

def test_poisson_cdf_matches_scipy():
    """Term recurrence agrees with scipy's Poisson CDF."""
    means = np.array([0.1, 1.5, 7.0])
    for k in (0, 2, 5):
        assert limits.poisson_cdf(k, means) == pytest.approx(poisson.cdf(k, means), rel=1e-12)


def test_limit_max_cdf_gumbel_at_zero(w_bank):
    """E[G(0)**W] = E_{1/2}(-1/sqrt(pi)) by both routes."""
    series = limits.limit_max_cdf(GUMBEL, 0.5, 0.0)
    assert series == pytest.approx(erfcx(1.0 / math.sqrt(math.pi)), abs=1e-10)
    value, se = limits.max_cdf_estimate(GUMBEL, 0.5, 0.0, "monte_carlo", w_bank)
    assert abs(value - series) <= 4.0 * se


def test_limit_max_cdf_routes_agree_on_grid(w_bank):
    """Series and Monte Carlo agree within 4 SE across the support."""
    for x in np.linspace(-1.5, 4.0, 12):
        series = limits.limit_max_cdf(GUMBEL, 0.5, float(x))
        value, se = limits.max_cdf_estimate(GUMBEL, 0.5, float(x), "monte_carlo", w_bank)
        assert abs(value - series) <= 4.0 * max(se, 1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_limit_max_cdf_routes_agree_on_quantile_grid(alpha):
    """Series and Monte Carlo agree within 4 SE on 20 quantiles of the Monte Carlo law."""
    bank = limits.hitting_time_bank(alpha, 10**5, seed=73)
    law = limits.max_limit_law(GUMBEL, alpha, "monte_carlo", bank)
    for p in np.linspace(0.05, 0.95, 20):
        x = law.quantile(float(p))
        series = limits.limit_max_cdf(GUMBEL, alpha, x)
        value, se = limits.max_cdf_estimate(GUMBEL, alpha, x, "monte_carlo", bank)
        assert abs(value - series) <= 4.0 * max(se, 1e-12)


def test_monte_carlo_route_rejects_bank_for_other_alpha(w_bank):
    """A W bank built for alpha = 1/2 cannot serve another alpha."""
    with pytest.raises(ParameterError):
        limits.kth_order_limit(2, 0.3, 1.0, w_bank)
    with pytest.raises(ParameterError):
        limits.limit_max_cdf(GUMBEL, 0.3, 0.0, "monte_carlo", w_bank)
    with pytest.raises(ParameterError):
        limits.max_limit_law(GUMBEL, 0.7, "monte_carlo", w_bank)


def test_limit_max_cdf_frechet_support():
    """Under a Frechet MDA the law puts no mass at or below 0."""
    frechet = mda_for(pareto(2.0))
    assert limits.limit_max_cdf(frechet, 0.5, 0.0) == 0.0
    assert 0.0 < limits.limit_max_cdf(frechet, 0.5, 1.0) < 1.0


def test_monte_carlo_route_needs_bank():
    """Monte Carlo without a bank raises BankMissingError."""
    with pytest.raises(BankMissingError):
        limits.limit_max_cdf(GUMBEL, 0.5, 0.0, "monte_carlo")


def test_kth_order_k1_is_max_law(w_bank):
    """k = 1 reproduces limit_max_cdf's Monte Carlo value exactly."""
    lam = float(GUMBEL.big_lambda(0.3))
    assert limits.kth_order_limit(1, 0.5, lam, w_bank) == limits.limit_max_cdf(GUMBEL, 0.5, 0.3, "monte_carlo", w_bank)


def test_kth_order_monotone_in_k(w_bank):
    """The k-th largest is stochastically smaller as k grows."""
    values = [limits.kth_order_limit(k, 0.5, 1.0, w_bank) for k in (1, 2, 3)]
    assert values[0] < values[1] < values[2]


def test_kth_order_edge_cases(w_bank):
    """lam = 0 gives 1 and k < 1 is rejected."""
    assert limits.kth_order_limit(2, 0.5, 0.0, w_bank) == 1.0
    with pytest.raises(ParameterError):
        limits.kth_order_limit(0, 0.5, 1.0, w_bank)


# --- Two largest ---

def test_two_largest_routes_agree(w_bank):
    """Derivative series and Monte Carlo agree within 4 SE."""
    series = limits.two_largest_limit(0.5, GUMBEL, 2.0, 0.0, "series")
    value, se = limits.two_largest_estimate(0.5, GUMBEL, 2.0, 0.0, "monte_carlo", w_bank)
    assert abs(series - value) <= 4.0 * se


def test_two_largest_bounded_by_marginal(w_bank):
    """P(M1 <= u1, M2 <= u2) lies between P(M1 <= u2) and P(M1 <= u1)."""
    joint = limits.two_largest_limit(0.5, GUMBEL, 2.0, 0.0, "series")
    assert limits.limit_max_cdf(GUMBEL, 0.5, 0.0) <= joint <= limits.limit_max_cdf(GUMBEL, 0.5, 2.0)


def test_two_largest_requires_ordered_levels():
    """u1 must exceed u2."""
    with pytest.raises(ParameterError):
        limits.two_largest_limit(0.5, GUMBEL, 0.0, 1.0, "series")


# --- LimitLaw ---

def test_series_law_quantile_inverts_cdf():
    """F(F^{-1}(p)) = p on the series route."""
    law = limits.max_limit_law(GUMBEL, 0.5, "series")
    for p in (0.1, 0.5, 0.9):
        assert law.evaluate(law.quantile(p)) == pytest.approx(p, abs=1e-8)


def test_frechet_law_quantile_is_positive():
    """Quantiles of a Frechet-type limit are positive."""
    law = limits.max_limit_law(mda_for(pareto(1.0)), 0.5, "series")
    assert law.quantile(0.5) > 0.0


def test_bank_law_uses_bank_quantile(w_bank):
    """Bank-route laws read quantiles off the bank."""
    law = limits.hitting_time_law(w_bank)
    assert law.quantile(0.5) == w_bank.quantile(0.5)
    assert law.evaluate(law.quantile(0.5)) >= 0.5


def test_excursion_law_from_bank():
    """The V law wraps a given bank on (0, 1)."""
    bank = EcdfBank.from_samples([0.2, 0.4, 0.6, 0.8], law="V")
    law = limits.excursion_limit_cdf(bank=bank)
    assert law.support == (0.0, 1.0)
    assert law.evaluate(0.5) == 0.5


def test_export_grid_writes_csv(tmp_path):
    """x,value,error_estimate rows for each grid point."""
    law = limits.max_limit_law(GUMBEL, 0.5, "series")
    path = limits.export_grid(law, [0.0, 1.0], tmp_path / "grid.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "value", "error_estimate"]
    assert frame["value"].iloc[0] == pytest.approx(erfcx(1.0 / math.sqrt(math.pi)), abs=1e-10)
