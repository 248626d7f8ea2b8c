"""
Unit tests for the random variate service.

Moment checks use fixed seeds and compare against closed-form values with a
margin of a few standard errors.
"""

import math

import numpy as np
import pytest
from scipy.special import erfc
from scipy.special import gamma as gamma_fn

from app.services import stats
from app.services.errors import ParameterError
from app.services.rng import (
    Distribution,
    StreamSeed,
    deterministic,
    exponential,
    hitting_time_mean,
    hitting_time_sample,
    make_stream,
    pareto,
    pareto_sample,
    stable_standard_sample,
    uniform_open,
    waiting_sample,
)


# --- Helpers ---

def within_se(samples: np.ndarray, target: float, n_se: float = 4.0) -> bool:
    """True when the sample mean is within n_se standard errors of target."""
    se = samples.std() / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= n_se * se


class InverseSquareNormalLaw:
    """CDF of 1 / (2 Z**2) for standard normal Z."""

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, erfc(1.0 / (2.0 * np.sqrt(np.maximum(x, 1e-300)))), 0.0)


# --- Tests ---

def test_same_stream_seed_reproduces_sequence():
    """Two generators from the same StreamSeed emit identical draws."""
    a = make_stream(7, 3).random(1000)
    b = StreamSeed(7, 3).generator().random(1000)
    assert np.array_equal(a, b)


def test_different_stream_index_gives_different_sequence():
    """Neighbouring stream indices do not share draws."""
    a = make_stream(7, 3).random(100)
    b = make_stream(7, 4).random(100)
    assert not np.array_equal(a, b)


def test_stream_seed_rejects_bad_values():
    """Negative indices and seeds outside 64 bits are rejected."""
    with pytest.raises(ParameterError):
        StreamSeed(0, -1)
    with pytest.raises(ParameterError):
        StreamSeed(2**64, 0)


def test_streams_are_uncorrelated():
    """100 neighbouring streams show no pairwise correlation above 0.05."""
    draws = np.array([make_stream(19, i).random(10**4) for i in range(100)])
    corr = np.corrcoef(draws)
    off_diagonal = corr[~np.eye(100, dtype=bool)]
    assert np.max(np.abs(off_diagonal)) <= 0.05


def test_uniform_open_never_returns_zero():
    """uniform_open draws lie in (0, 1]."""
    u = uniform_open(make_stream(1, 0), 10**5)
    assert u.min() > 0.0
    assert u.max() <= 1.0


def test_pareto_sample_inverse_transform():
    """u**(-1/alpha) at a few exact points."""
    assert pareto_sample(0.5, 0.25) == pytest.approx(16.0)
    assert pareto_sample(0.5, 1.0) == 1.0
    out = pareto_sample(0.5, np.array([1.0, 0.5]))
    assert out == pytest.approx([1.0, 4.0])


def test_pareto_sample_rejects_out_of_range():
    """u must be in (0, 1] and alpha in (0, 1)."""
    with pytest.raises(ParameterError):
        pareto_sample(0.5, 0.0)
    with pytest.raises(ParameterError):
        pareto_sample(1.5, 0.5)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_stable_laplace_transform(alpha, lam):
    """E exp(-lam S) matches exp(-lam**alpha)."""
    s = stable_standard_sample(alpha, make_stream(11, int(100 * alpha + 10 * lam)), 10**5)
    assert within_se(np.exp(-lam * s), math.exp(-lam**alpha))


def test_stable_half_is_inverse_square_normal():
    """For alpha = 1/2, S has the law of 1 / (2 Z**2): CDF erfc(1 / (2 sqrt(x)))."""
    s = stable_standard_sample(0.5, make_stream(18, 0), 10**5)
    bank = stats.EcdfBank.from_samples(s)
    assert stats.ks_distance(bank, InverseSquareNormalLaw()) <= stats.dkw_epsilon(10**5, 1e-3)


def test_stable_negative_moment():
    """E S**(-alpha) = 1 / Gamma(1 + alpha)."""
    s = stable_standard_sample(0.5, make_stream(12, 0), 10**5)
    assert within_se(s ** (-0.5), 1.0 / gamma_fn(1.5))


def test_hitting_time_mean_half():
    """Mean of W_{1/2}(1) within 1% of 2/pi at n = 10**6."""
    w = hitting_time_sample(0.5, 1.0, make_stream(13, 0), 10**6)
    assert hitting_time_mean(0.5) == pytest.approx(2.0 / math.pi)
    assert abs(w.mean() / (2.0 / math.pi) - 1.0) < 0.01


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_hitting_time_mean_away_from_half(alpha):
    """E W_alpha(1) = 1 / (Gamma(1 - alpha) Gamma(1 + alpha))."""
    target = 1.0 / (gamma_fn(1.0 - alpha) * gamma_fn(1.0 + alpha))
    assert hitting_time_mean(alpha) == pytest.approx(target)
    w = hitting_time_sample(alpha, 1.0, make_stream(17, int(10 * alpha)), 10**5)
    assert within_se(w, target)


def test_hitting_time_self_similarity():
    """W(t) built from the same stream equals t**alpha W(1)."""
    w1 = hitting_time_sample(0.4, 1.0, make_stream(14, 0), 1000)
    wt = hitting_time_sample(0.4, 8.0, make_stream(14, 0), 1000)
    assert wt == pytest.approx(8.0**0.4 * w1)


def test_hitting_time_at_zero_level():
    """W(0) = 0."""
    assert hitting_time_sample(0.5, 0.0, make_stream(0, 0)) == 0.0
    assert np.all(hitting_time_sample(0.5, 0.0, make_stream(0, 0), 5) == 0.0)


def test_exponential_square_root_moment():
    """E sqrt(E) = Gamma(3/2) for Exp(1)."""
    e = waiting_sample(exponential(1.0), make_stream(15, 0), 10**5)
    assert within_se(np.sqrt(e), math.sqrt(math.pi) / 2.0)


def test_pareto_waits_are_at_least_one():
    """Pareto waits live on [1, inf)."""
    e = pareto(1.5).sample(make_stream(16, 0), 1000)
    assert e.min() >= 1.0


def test_deterministic_waits_are_constant():
    """deterministic(v) always returns v."""
    dist = deterministic(2.5)
    assert dist.sample(make_stream(0, 0)) == 2.5
    assert np.all(dist.sample(make_stream(0, 0), 4) == 2.5)
    assert dist.variance == 0.0


def test_distribution_moments():
    """Closed-form means and variances, infinite where they do not exist."""
    assert exponential(2.0).mean == 0.5
    assert exponential(2.0).variance == 0.25
    assert pareto(3.0).mean == pytest.approx(1.5)
    assert math.isinf(pareto(0.5).mean)
    assert math.isinf(pareto(1.5).variance)


def test_distribution_rejects_bad_parameters():
    """Non-positive parameters and unknown kinds are rejected."""
    with pytest.raises(ParameterError):
        Distribution("exponential", 0.0)
    with pytest.raises(ParameterError):
        Distribution("gamma", 1.0)
