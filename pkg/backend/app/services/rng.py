"""
Random variate generation - reproducible, splittable streams and samplers.

Every simulation draws from a numpy Generator built from a StreamSeed
(master seed, stream index). Streams with different seeds are independent;
the same seed always reproduces the same sequence, whatever worker runs it.

Scale convention: the stable law S_alpha used here has Laplace transform
exp(-lam**alpha). The subordinator whose Levy measure is
alpha * y**(-alpha-1) dy has Laplace exponent Gamma(1-alpha) * lam**alpha,
and all hitting times W are taken with respect to that subordinator.
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from app.services.errors import ParameterError

ArrayOrFloat = Union[float, np.ndarray]
Size = Optional[Union[int, tuple]]

_MAX_SEED = 2**64


# --- Streams ---

@dataclass(frozen=True)
class StreamSeed:
    """Identifies one reproducible random stream."""
    master_seed: int
    stream_index: int

    def __post_init__(self):
        if not 0 <= self.master_seed < _MAX_SEED:
            raise ParameterError("master_seed", self.master_seed, "a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ParameterError("stream_index", self.stream_index, "non-negative")

    def generator(self) -> np.random.Generator:
        """Build a fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence([self.master_seed, self.stream_index])
        return np.random.Generator(np.random.PCG64(seq))


def make_stream(master_seed: int, stream_index: int) -> np.random.Generator:
    """Shorthand for StreamSeed(master_seed, stream_index).generator()."""
    return StreamSeed(master_seed, stream_index).generator()


def uniform_open(stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
    """Uniform draws on (0, 1]; an exact zero can never be returned."""
    return 1.0 - stream.random(size)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha", alpha, "in (0, 1)")


# --- Pareto ---

def pareto_sample(alpha: float, u: ArrayOrFloat) -> ArrayOrFloat:
    """Inverse-transform Pareto draw y = u**(-1/alpha), P(Y > y) = y**(-alpha)."""
    _check_alpha(alpha)
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr > 1.0):
        raise ParameterError("u", u, "in (0, 1]")
    y = u_arr ** (-1.0 / alpha)
    return float(y) if y.ndim == 0 else y


def pareto_tail_sample(shape: float, stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
    """Pareto(shape) on [1, inf) for any shape > 0."""
    if shape <= 0.0:
        raise ParameterError("shape", shape, "positive")
    return uniform_open(stream, size) ** (-1.0 / shape)


# --- Positive stable law and hitting times ---

def stable_standard_sample(alpha: float, stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
    """One-sided stable draws with E exp(-lam S) = exp(-lam**alpha).

    Kanter's representation: with U uniform on (0, pi) and E standard
    exponential, S = sin(aU)/sin(U)**(1/a) * (sin((1-a)U)/E)**((1-a)/a).
    """
    _check_alpha(alpha)
    u = math.pi * uniform_open(stream, size)
    e = stream.standard_exponential(size)
    log_s = (
        np.log(np.sin(alpha * u))
        - np.log(np.sin(u)) / alpha
        + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(e))
    )
    return np.exp(log_s)


def hitting_time_sample(alpha: float, t: float, stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
    """Draws of W_alpha(t), the first passage above t of the subordinator."""
    _check_alpha(alpha)
    if t < 0.0:
        raise ParameterError("t", t, "non-negative")
    if t == 0.0:
        return 0.0 if size is None else np.zeros(size)
    s = stable_standard_sample(alpha, stream, size)
    return t**alpha / (gamma_fn(1.0 - alpha) * s**alpha)


def hitting_time_mean(alpha: float) -> float:
    """E W_alpha(1) = 1 / (Gamma(1-alpha) Gamma(1+alpha))."""
    _check_alpha(alpha)
    return 1.0 / (gamma_fn(1.0 - alpha) * gamma_fn(1.0 + alpha))


# --- Waiting-time / observation laws ---

DistributionKind = Literal["exponential", "pareto", "deterministic"]


@dataclass(frozen=True)
class Distribution:
    """A positive law: exponential(rate), pareto(alpha) on [1, inf) or a constant."""
    kind: DistributionKind
    param: float

    def __post_init__(self):
        if self.kind not in ("exponential", "pareto", "deterministic"):
            raise ParameterError("kind", self.kind, "exponential, pareto or deterministic")
        if not self.param > 0.0:
            label = {"exponential": "rate", "pareto": "alpha", "deterministic": "value"}[self.kind]
            raise ParameterError(label, self.param, "positive")

    @property
    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.param
        if self.kind == "deterministic":
            return self.param
        return self.param / (self.param - 1.0) if self.param > 1.0 else math.inf

    @property
    def variance(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.param**2
        if self.kind == "deterministic":
            return 0.0
        a = self.param
        return a / ((a - 1.0) ** 2 * (a - 2.0)) if a > 2.0 else math.inf

    def sample(self, stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
        return waiting_sample(self, stream, size)


def exponential(rate: float = 1.0) -> Distribution:
    return Distribution("exponential", rate)


def pareto(alpha: float) -> Distribution:
    return Distribution("pareto", alpha)


def deterministic(value: float = 1.0) -> Distribution:
    return Distribution("deterministic", value)


def waiting_sample(dist: Distribution, stream: np.random.Generator, size: Size = None) -> ArrayOrFloat:
    """Draw from the named positive law."""
    if dist.kind == "exponential":
        return stream.exponential(1.0 / dist.param, size)
    if dist.kind == "pareto":
        return pareto_tail_sample(dist.param, stream, size)
    if size is None:
        return float(dist.param)
    return np.full(size, float(dist.param))
