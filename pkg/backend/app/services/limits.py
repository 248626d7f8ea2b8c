"""
Limits Service - numerical evaluation of the limiting distributions.

All mixtures are over W = W_alpha(1), the passage time of level 1 by the
subordinator with Laplace exponent c lam**alpha, c = Gamma(1 - alpha). Its
Laplace transform is E exp(-s W) = E_alpha(-s / c), where E_alpha is the
Mittag-Leffler function, so every G(x)**W mixture has a series route and a
Monte Carlo route over a bank of W draws.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache, partial
from pathlib import Path
from typing import Callable, Literal, Optional, Tuple, Union

import mpmath
import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln, rgamma

from app import settings
from app.services.errors import BankMissingError, ParameterError, PrecisionError
from app.services.model import MdaSpec
from app.services.rng import hitting_time_sample, make_stream
from app.services.stats import EcdfBank

logger = logging.getLogger(__name__)

Route = Literal["series", "monte_carlo", "bank"]

# W banks use their own block of reserved stream indices
W_BANK_STREAM = settings.BANK_STREAM_OFFSET + 2**40
# float64 summation is used while the largest term exceeds the result by
# at most this many decimal digits
FLOAT_DIGIT_BUDGET = 4.0
SERIES_ERROR = 1e-12
# large arguments switch to the asymptotic expansion once its truncation
# error falls below this
ASYMPTOTIC_ERROR = 1e-14
ASYMPTOTIC_TERMS = 200


# --- Mittag-Leffler function ---

def _result_scale_log10(alpha: float, x: float, derivative: bool) -> float:
    """Rough log10 size of E_alpha(-x) (or its derivative) for digit budgeting."""
    if alpha == 1.0:
        return -x / math.log(10.0)
    c = gamma_fn(1.0 - alpha)
    power = 2.0 if derivative else 1.0
    return -math.log10(1.0 + (x * c) ** power)


def _series_terms(alpha: float, x: float, derivative: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-magnitudes and signs of the series terms at z = -x, up to where they vanish."""
    n_hi = int(math.ceil(math.e**2 * x ** (1.0 / alpha) / alpha)) + 100
    n = np.arange(0, n_hi + 1, dtype=float)
    with np.errstate(divide="ignore"):
        if derivative:
            n = n[1:]
            logs = np.log(n) + (n - 1.0) * math.log(x) - gammaln(1.0 + n * alpha)
            signs = np.where((n - 1.0) % 2 == 0, 1.0, -1.0)
        else:
            logs = n * math.log(x) - gammaln(1.0 + n * alpha)
            signs = np.where(n % 2 == 0, 1.0, -1.0)
    # drop the tail once terms fall 20 digits below the result
    cutoff = (_result_scale_log10(alpha, x, derivative) - 20.0) * math.log(10.0)
    last = int(np.flatnonzero(logs >= cutoff)[-1]) + 1 if np.any(logs >= cutoff) else 1
    return n[:last], logs[:last], signs[:last]


def _asymptotic(alpha: float, x: float, derivative: bool) -> Tuple[float, float]:
    """E_alpha(-x) ~ sum_{k>=1} (-1)**(k+1) x**(-k) / Gamma(1 - alpha k) for large x.

    The expansion diverges. It is cut where the envelope
    Gamma(alpha k) x**(-k) / pi of its terms is smallest, and that envelope
    value is the error estimate.
    """
    k = np.arange(1, ASYMPTOTIC_TERMS + 1, dtype=float)
    log_x = math.log(x)
    log_mag = -gammaln(1.0 - alpha * k) - k * log_x
    log_env = gammaln(alpha * k) - math.log(math.pi) - k * log_x
    signs = np.where(k % 2 == 1, 1.0, -1.0)
    if derivative:
        log_mag = log_mag + np.log(k) - log_x
        log_env = log_env + np.log(k) - log_x
    with np.errstate(over="ignore"):
        # rgamma is exactly 0 at the poles of Gamma(1 - alpha k)
        terms = signs * np.sign(rgamma(1.0 - alpha * k)) * np.exp(log_mag)
    cut = int(np.argmin(log_env))
    return float(math.fsum(terms[:cut])), float(math.exp(log_env[cut]))


@lru_cache(maxsize=4096)
def _mittag_leffler_scalar(alpha: float, z: float, derivative: bool) -> float:
    x = -z
    if x == 0.0:
        return 1.0 / gamma_fn(1.0 + alpha) if derivative else 1.0
    if alpha == 1.0:
        return math.exp(z)
    if x >= 1.0:
        value, err = _asymptotic(alpha, x, derivative)
        if err <= ASYMPTOTIC_ERROR:
            return value
    # the largest term is about exp(x**(1/alpha))
    log_peak = math.log(x) / alpha
    if log_peak > math.log(10.0 * settings.ML_MAX_DIGITS):
        raise PrecisionError(alpha, z, int(min(math.exp(min(log_peak, 700.0)), 1e300) / math.log(10.0)))
    peak_log10 = math.exp(log_peak) / math.log(10.0)
    spread = peak_log10 - _result_scale_log10(alpha, x, derivative)
    digits = int(math.ceil(spread)) + 20
    if digits > settings.ML_MAX_DIGITS:
        raise PrecisionError(alpha, z, digits)

    n, logs, signs = _series_terms(alpha, x, derivative)
    if spread <= FLOAT_DIGIT_BUDGET:
        return float(math.fsum(signs * np.exp(logs)))

    with mpmath.workdps(digits):
        a = mpmath.mpf(alpha)
        zm = mpmath.mpf(z)
        total = mpmath.mpf(0)
        for k in n.astype(np.int64):
            k = int(k)
            if derivative:
                total += k * zm ** (k - 1) / mpmath.gamma(1 + k * a)
            else:
                total += zm**k / mpmath.gamma(1 + k * a)
        return float(total)


def _ml_apply(alpha: float, z, derivative: bool):
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("alpha", alpha, "in (0, 1]")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 0.0) or np.any(np.isnan(z_arr)):
        raise ParameterError("z", z, "<= 0")
    out = np.array([_mittag_leffler_scalar(float(alpha), float(v), derivative) for v in z_arr.ravel()])
    out = out.reshape(z_arr.shape)
    return float(out) if out.ndim == 0 else out


def mittag_leffler_fn(alpha: float, z):
    """E_alpha(z) = sum_n z**n / Gamma(1 + n alpha) for z <= 0.

    Moderate cancellation is summed in float64; larger cancellation uses
    mpmath with enough digits to absorb it. PrecisionError past
    ML_MAX_DIGITS.
    """
    return _ml_apply(alpha, z, derivative=False)


def mittag_leffler_derivative(alpha: float, z):
    """E'_alpha(z) = sum_{n>=1} n z**(n-1) / Gamma(1 + n alpha) for z <= 0."""
    return _ml_apply(alpha, z, derivative=True)


# --- W banks and Poisson mixtures ---

def hitting_time_bank(alpha: float, n: Optional[int] = None, seed: int = 0) -> EcdfBank:
    """Bank of W_alpha(1) draws from a reserved stream."""
    n = settings.W_BANK_SIZE if n is None else n
    if n < 1:
        raise ParameterError("n", n, ">= 1")
    w = hitting_time_sample(alpha, 1.0, make_stream(seed, W_BANK_STREAM), n)
    logger.info(f"W bank: alpha={alpha}, n={n}, seed={seed}")
    return EcdfBank(w, {"law": "W", "alpha": alpha, "n": n, "tol": 0, "seed": seed})


def poisson_cdf(k: int, mean) -> np.ndarray:
    """P(Poisson(mean) <= k) by the term recurrence p_j = p_{j-1} mean / j."""
    m = np.asarray(mean, dtype=float)
    term = np.exp(-m)
    total = term.copy()
    for j in range(1, k + 1):
        term = term * m / j
        total = total + term
    return total


def _require_bank(bank: Optional[EcdfBank], law: str, alpha: Optional[float] = None) -> np.ndarray:
    """The W draws of the bank, which must have been built for alpha when one is given."""
    if bank is None:
        raise BankMissingError(law)
    built_for = bank.provenance.get("alpha")
    if alpha is not None and built_for is not None and not math.isclose(float(built_for), alpha):
        raise ParameterError("alpha", alpha, f"equal to the bank's alpha={built_for}")
    return bank.values


def _mixture(lam: float, w: np.ndarray, k: int) -> Tuple[float, float]:
    """Mean and standard error of P(Poisson(w lam) <= k - 1) over the bank."""
    if math.isinf(lam):
        return 0.0, 0.0
    vals = poisson_cdf(k - 1, w * lam)
    return float(np.mean(vals)), float(np.std(vals) / math.sqrt(w.size))


def limit_max_cdf(
    mda: MdaSpec,
    alpha: float,
    x: float,
    route: Route = "series",
    bank: Optional[EcdfBank] = None,
) -> float:
    """E[G(x)**W] for W = W_alpha(1)."""
    return max_cdf_estimate(mda, alpha, x, route, bank)[0]


def max_cdf_estimate(mda: MdaSpec, alpha: float, x: float, route: Route, bank: Optional[EcdfBank]) -> Tuple[float, float]:
    """(value, error estimate) of E[G(x)**W]."""
    lam = float(mda.big_lambda(x))
    if lam == 0.0:
        return 1.0, 0.0
    if route == "series":
        if math.isinf(lam):
            return 0.0, 0.0
        c = gamma_fn(1.0 - alpha)
        return float(mittag_leffler_fn(alpha, -lam / c)), SERIES_ERROR
    if route == "monte_carlo":
        return _mixture(lam, _require_bank(bank, "limit_max_cdf", alpha), 1)
    raise ParameterError("route", route, "series or monte_carlo")


def kth_order_limit(k: int, alpha: float, lam: float, bank: Optional[EcdfBank] = None) -> float:
    """E[P(Poisson(W lam) <= k - 1)]: the limit law of the k-th largest observation."""
    if bank is not None:
        _require_bank(bank, "kth_order_limit", alpha)
    return kth_order_estimate(k, lam, bank)[0]


def kth_order_estimate(k: int, lam: float, bank: Optional[EcdfBank]) -> Tuple[float, float]:
    """(value, standard error) of the k-th order mixture."""
    if k < 1:
        raise ParameterError("k", k, ">= 1")
    if lam < 0.0:
        raise ParameterError("lam", lam, ">= 0")
    if lam == 0.0:
        return 1.0, 0.0
    return _mixture(lam, _require_bank(bank, "kth_order_limit"), k)


def two_largest_limit(
    alpha: float,
    mda: MdaSpec,
    u1: float,
    u2: float,
    route: Route = "monte_carlo",
    bank: Optional[EcdfBank] = None,
) -> float:
    """P(largest <= u1, second largest <= u2) in the limit, u1 > u2."""
    return two_largest_estimate(alpha, mda, u1, u2, route, bank)[0]


def two_largest_estimate(
    alpha: float,
    mda: MdaSpec,
    u1: float,
    u2: float,
    route: Route = "monte_carlo",
    bank: Optional[EcdfBank] = None,
) -> Tuple[float, float]:
    if not u1 > u2:
        raise ParameterError("u1", u1, f"> u2={u2}")
    lam1 = float(mda.big_lambda(u1))
    lam2 = float(mda.big_lambda(u2))
    if math.isinf(lam2):
        return 0.0, 0.0
    gap = lam2 - lam1
    if route == "series":
        c = gamma_fn(1.0 - alpha)
        z = -lam2 / c
        value = mittag_leffler_fn(alpha, z) + gap / c * mittag_leffler_derivative(alpha, z)
        return float(value), SERIES_ERROR
    if route != "monte_carlo":
        raise ParameterError("route", route, "series or monte_carlo")
    w = _require_bank(bank, "two_largest_limit", alpha)
    g = np.exp(-lam2 * w)
    vals = g * (1.0 + gap * w)
    return float(np.mean(g) + gap * np.mean(w * g)), float(np.std(vals) / math.sqrt(w.size))


# --- LimitLaw ---

def _grid_apply(fn: Callable[[float], Tuple[float, float]], x, index: int):
    x_arr = np.asarray(x, dtype=float)
    out = np.array([fn(float(v))[index] for v in x_arr.ravel()]).reshape(x_arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LimitLaw:
    """A limiting CDF with its route and pointwise error estimate."""
    description: str
    route: Route
    point: Callable[[float], Tuple[float, float]]
    support: Tuple[float, float] = (-math.inf, math.inf)
    bank: Optional[EcdfBank] = None

    def evaluate(self, x):
        if self.route == "bank":
            return self.bank.evaluate(x)
        return _grid_apply(self.point, x, 0)

    def error_estimate(self, x):
        return _grid_apply(self.point, x, 1)

    def quantile(self, p: float) -> float:
        """Smallest x with F(x) >= p (bank route) or the root of F(x) = p."""
        if not 0.0 < p < 1.0:
            raise ParameterError("p", p, "in (0, 1)")
        if self.route == "bank":
            return self.bank.quantile(p)
        lo_end, hi_end = self.support
        lo = lo_end + 1.0 if math.isfinite(lo_end) else -1.0
        hi = lo + 2.0
        for _ in range(200):
            if self.evaluate(lo) < p:
                break
            lo = (lo_end + lo) / 2.0 if math.isfinite(lo_end) else lo - 1.0
        for _ in range(200):
            if self.evaluate(hi) > p:
                break
            hi = 2.0 * hi + 1.0
        return float(brentq(lambda v: self.evaluate(v) - p, lo, hi, xtol=1e-10))


def _support(mda: MdaSpec) -> Tuple[float, float]:
    return (0.0, math.inf) if mda.family == "frechet" else (-math.inf, math.inf)


def max_limit_law(mda: MdaSpec, alpha: float, route: Route = "series", bank: Optional[EcdfBank] = None) -> LimitLaw:
    if route == "monte_carlo":
        _require_bank(bank, "limit_max_cdf", alpha)
    return LimitLaw(
        description=f"E[G(x)^W], {mda.family}, alpha={alpha}",
        route=route,
        point=partial(max_cdf_estimate, mda, alpha, route=route, bank=bank),
        support=_support(mda),
        bank=bank,
    )


def _kth_point(x: float, mda: MdaSpec, k: int, bank: EcdfBank) -> Tuple[float, float]:
    return kth_order_estimate(k, float(mda.big_lambda(x)), bank)


def kth_order_law(mda: MdaSpec, alpha: float, k: int, bank: Optional[EcdfBank]) -> LimitLaw:
    _require_bank(bank, "kth_order_limit", alpha)
    return LimitLaw(
        description=f"k={k} order statistic, {mda.family}, alpha={alpha}",
        route="monte_carlo",
        point=partial(_kth_point, mda=mda, k=k, bank=bank),
        support=_support(mda),
        bank=bank,
    )


def _bank_point(x: float, bank: EcdfBank) -> Tuple[float, float]:
    f = bank.evaluate(x)
    return f, math.sqrt(f * (1.0 - f) / bank.n)


def bank_law(bank: EcdfBank, description: str, support: Tuple[float, float]) -> LimitLaw:
    """A law given directly by a sample bank (its ECDF)."""
    return LimitLaw(description, "bank", partial(_bank_point, bank=bank), support, bank)


def hitting_time_law(bank: EcdfBank) -> LimitLaw:
    """Law of W_alpha(1), the limit of tau(t) / d_inv(t)."""
    return bank_law(bank, f"W, alpha={bank.provenance.get('alpha')}", (0.0, math.inf))


def excursion_limit_cdf(
    n_samples: int = 10**4,
    alpha: float = 0.5,
    seed: int = 0,
    tol: Optional[float] = None,
    method: str = "series",
    workers: int = 1,
    bank: Optional[EcdfBank] = None,
) -> LimitLaw:
    """Law of V, the largest jump completed before the passage of level 1."""
    if bank is None:
        from app.services.subord import largest_jump_law

        bank = largest_jump_law(alpha, n_samples, seed, tol, method, workers)
    else:
        _require_bank(bank, "excursion_limit_cdf", alpha)
    return bank_law(bank, f"V, alpha={alpha}", (0.0, 1.0))


# --- Export ---

def export_grid(law: LimitLaw, xs, path: Union[str, Path]) -> Path:
    """Write x,value,error_estimate rows for a grid of x."""
    xs = np.asarray(xs, dtype=float)
    frame = pd.DataFrame({"x": xs, "value": law.evaluate(xs), "error_estimate": law.error_estimate(xs)})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    return path
