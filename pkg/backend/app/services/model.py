"""
Model Service - the joint law of (X, Y) and its normalizing functions.

A JointModel bundles the observation law (X), the interarrival law (Y), the
dependence mode tying them together, the MDA normalizers a(t), b(t) of X and
the renewal normalizers d(t), d_inv(t) of Y. Every callable stored on a model
is a module-level function or a small class so models pickle cleanly into
worker processes.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np

from app.services.errors import CalibrationError, ParameterError
from app.services.rng import Distribution, Size, pareto_tail_sample, waiting_sample

logger = logging.getLogger(__name__)

MIN_CALIBRATION_SAMPLES = 10**6
MIN_EXCEEDANCES = 100


# --- Normalizer building blocks (picklable) ---

def _constant(t, value: float):
    return value


def _log_over_rate(t, rate: float):
    return np.log(t) / rate


def _power(t, exponent: float):
    return np.asarray(t, dtype=float) ** exponent if np.ndim(t) else float(t) ** exponent


def _pareto_tail(y, alpha: float):
    y_arr = np.asarray(y, dtype=float)
    tail = np.where(y_arr < 1.0, 1.0, np.maximum(y_arr, 1.0) ** (-alpha))
    return float(tail) if tail.ndim == 0 else tail


class LogLogInterpolator:
    """Monotone piecewise-linear interpolation in log-log coordinates."""

    def __init__(self, xs: np.ndarray, ys: np.ndarray, name: str):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        order = np.argsort(xs, kind="stable")
        log_x, first = np.unique(np.log(xs[order]), return_index=True)
        self.log_x = log_x
        self.log_y = np.log(ys[order][first])
        self.name = name

    @property
    def domain(self) -> Tuple[float, float]:
        return float(np.exp(self.log_x[0])), float(np.exp(self.log_x[-1]))

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        lo, hi = self.domain
        # relative slack absorbs exp(log(x)) rounding at the grid ends
        if np.any(x_arr < lo * (1 - 1e-12)) or np.any(x_arr > hi * (1 + 1e-12)):
            raise CalibrationError(
                f"{self.name} requested at {x!r}, outside calibrated range [{lo:.6g}, {hi:.6g}]"
            )
        out = np.exp(np.interp(np.log(x_arr), self.log_x, self.log_y))
        return float(out) if out.ndim == 0 else out


# --- Domain types ---

@dataclass(frozen=True)
class MdaSpec:
    """Max-domain of attraction of X with its normalizers a(t) > 0 and b(t)."""
    family: Literal["gumbel", "frechet"]
    a: Callable
    b: Callable
    beta: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("gumbel", "frechet"):
            raise ParameterError("family", self.family, "gumbel or frechet")
        if self.family == "frechet" and not (self.beta and self.beta > 0):
            raise ParameterError("beta", self.beta, "positive for the Frechet family")

    def big_lambda(self, x):
        """Lambda(x) = -log G(x); +inf below the Frechet support."""
        x_arr = np.asarray(x, dtype=float)
        if self.family == "gumbel":
            out = np.exp(-x_arr)
        else:
            with np.errstate(divide="ignore"):
                out = np.where(x_arr > 0.0, np.maximum(x_arr, 1e-300) ** (-self.beta), np.inf)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        """G(x)."""
        out = np.exp(-np.asarray(self.big_lambda(x), dtype=float))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Calibration:
    """How the renewal normalizers were obtained."""
    route: Literal["analytic", "empirical"]
    sample_size: int = 0
    quantile_grid: Tuple[float, ...] = ()


@dataclass(frozen=True)
class InterarrivalSpec:
    """Tail of Y with its normalizer d (n P(Y > d(n)) -> 1) and inverse d_inv."""
    tail: Callable
    alpha: float
    d: Callable
    d_inv: Callable
    calibration: Calibration = field(default_factory=lambda: Calibration("analytic"))

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha", self.alpha, "in (0, 1)")

    def normalization_ratio(self, n):
        """n * tail(d(n)), which tends to 1."""
        n_arr = np.asarray(n, dtype=float)
        out = n_arr * np.asarray(self.tail(self.d(n_arr)), dtype=float)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Dependence:
    mode: Literal["independent", "identical", "ctrw_cycle"]
    wait: Optional[Distribution] = None


@dataclass(frozen=True)
class JointModel:
    """The iid pair law (X_n, Y_n) with all normalizers.

    observation is the X law; interarrival is the Y law for the independent
    and identical modes (always Pareto(alpha) here). In ctrw_cycle mode X is
    one waiting time and Y = X + R with R the excursion length.
    """
    mda: Optional[MdaSpec]
    inter: InterarrivalSpec
    dependence: Dependence
    observation: Distribution
    interarrival: Optional[Distribution] = None

    def __post_init__(self):
        mode = self.dependence.mode
        if mode == "identical":
            if self.interarrival is None or self.observation != self.interarrival:
                raise ParameterError("observation", self.observation, "equal to the interarrival law in identical mode")
        elif mode == "independent":
            if self.interarrival is None:
                raise ParameterError("interarrival", None, "set in independent mode")
        elif mode == "ctrw_cycle":
            wait = self.dependence.wait
            if wait is None or wait != self.observation:
                raise ParameterError("wait", wait, "equal to the observation law in ctrw_cycle mode")
            if not math.isfinite(wait.mean):
                raise ParameterError("wait", wait, "a law with finite mean")
        else:
            raise ParameterError("dependence", mode, "independent, identical or ctrw_cycle")

    def _require_mda(self) -> MdaSpec:
        if self.mda is None:
            raise ParameterError("observation", self.observation, "in a continuous MDA for normalized extremes")
        return self.mda

    def a_tilde(self, t: float) -> float:
        """a(d_inv(t))."""
        return float(self._require_mda().a(self.inter.d_inv(t)))

    def b_tilde(self, t: float) -> float:
        """b(d_inv(t))."""
        return float(self._require_mda().b(self.inter.d_inv(t)))


# --- Normalizers ---

def gumbel_normalizers_exponential(t: float) -> Tuple[float, float]:
    """(a, b) = (1, log t) for Exp(1): t P(X > x + log t) = exp(-x)."""
    return exponential_normalizers(1.0, t)


def exponential_normalizers(rate: float, t: float) -> Tuple[float, float]:
    """(a, b) = (1/rate, log(t)/rate) for Exp(rate)."""
    if rate <= 0.0:
        raise ParameterError("rate", rate, "positive")
    if t < 1.0:
        raise ParameterError("t", t, ">= 1")
    return 1.0 / rate, math.log(t) / rate


def frechet_normalizers_pareto(beta: float, t: float) -> Tuple[float, float]:
    """(a, b) = (t**(1/beta), 0) for Pareto(beta) on [1, inf)."""
    if beta <= 0.0:
        raise ParameterError("beta", beta, "positive")
    if t < 1.0:
        raise ParameterError("t", t, ">= 1")
    return t ** (1.0 / beta), 0.0


def pareto_renewal_normalizers(alpha: float, t: float) -> Tuple[float, float]:
    """(d(t), d_inv(t)) = (t**(1/alpha), t**alpha) for Pareto(alpha) steps."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha", alpha, "in (0, 1)")
    if t < 0.0:
        raise ParameterError("t", t, "non-negative")
    return t ** (1.0 / alpha), t**alpha


def mda_for(dist: Distribution) -> MdaSpec:
    """Built-in MdaSpec for an exponential or Pareto observation law."""
    if dist.kind == "exponential":
        return MdaSpec(
            family="gumbel",
            a=partial(_constant, value=1.0 / dist.param),
            b=partial(_log_over_rate, rate=dist.param),
        )
    if dist.kind == "pareto":
        return MdaSpec(
            family="frechet",
            a=partial(_power, exponent=1.0 / dist.param),
            b=partial(_constant, value=0.0),
            beta=dist.param,
        )
    raise ParameterError("observation", dist, "exponential or pareto (deterministic laws have no MDA)")


def pareto_interarrival(alpha: float) -> InterarrivalSpec:
    """Analytic InterarrivalSpec for Pareto(alpha) steps."""
    return InterarrivalSpec(
        tail=partial(_pareto_tail, alpha=alpha),
        alpha=alpha,
        d=partial(_power, exponent=1.0 / alpha),
        d_inv=partial(_power, exponent=alpha),
        calibration=Calibration("analytic"),
    )


def calibrate_normalizer_empirical(
    sampler: Callable[[int], np.ndarray],
    n_cal: int,
    t_grid: Sequence[float],
    alpha: float = 0.5,
    grid_points: int = 2000,
) -> InterarrivalSpec:
    """Solve n * tail(d(n)) = 1 on an empirical tail and invert d on t_grid.

    The k-th largest of n_cal draws is taken as the level with empirical
    tail k / n_cal, so d(n) is the (n_cal / n)-th largest draw,
    interpolated in log-log coordinates between order statistics.
    """
    if n_cal < MIN_CALIBRATION_SAMPLES:
        raise ParameterError("n_cal", n_cal, f">= {MIN_CALIBRATION_SAMPLES}")
    values = np.sort(np.asarray(sampler(n_cal), dtype=float))[::-1]
    if values.size != n_cal or values[-1] <= 0.0:
        raise CalibrationError("sampler must return n_cal positive values")

    k_grid = np.unique(np.round(np.geomspace(MIN_EXCEEDANCES, n_cal, grid_points)).astype(np.int64))
    n_grid = n_cal / k_grid
    d_grid = values[k_grid - 1]

    tail = LogLogInterpolator(d_grid, k_grid / n_cal, "empirical tail")
    d = LogLogInterpolator(n_grid, d_grid, "d")
    d_inv = LogLogInterpolator(d_grid, n_grid, "d_inv")

    for t in t_grid:
        lo, hi = d_inv.domain
        if not lo <= t <= hi:
            exceed = int(np.sum(values > t))
            raise CalibrationError(
                f"horizon t={t} is outside the reliable calibration range [{lo:.6g}, {hi:.6g}]",
                exceedances=exceed,
            )

    logger.info(
        f"Empirical calibration: n_cal={n_cal}, d(1)={d_grid[-1]:.4g}, "
        f"d({n_grid[0]:.0f})={d_grid[0]:.4g}"
    )
    return InterarrivalSpec(
        tail=tail,
        alpha=alpha,
        d=d,
        d_inv=d_inv,
        calibration=Calibration("empirical", sample_size=n_cal, quantile_grid=tuple(float(k) / n_cal for k in k_grid)),
    )


# --- Sampling ---

def joint_sample(model: JointModel, stream: np.random.Generator, size: Size = None):
    """Draw (x, y) pairs under the model's dependence mode."""
    mode = model.dependence.mode
    if mode == "independent":
        x = waiting_sample(model.observation, stream, size)
        y = pareto_tail_sample(model.inter.alpha, stream, size)
        return x, y
    if mode == "identical":
        y = pareto_tail_sample(model.inter.alpha, stream, size)
        return y, y

    from app.services.ctrw import sample_cycles

    batch = sample_cycles(model.dependence.wait, stream, 1 if size is None else size)
    if size is None:
        return float(batch.x[0]), float(batch.y[0])
    return batch.x, batch.y


def build_model(config, stream: Optional[np.random.Generator] = None, t_grid: Sequence[float] = ()) -> JointModel:
    """Construct a JointModel from a ModelConfig.

    Pareto interarrivals use the analytic normalizers; the CTRW cycle law has
    no closed-form tail and is calibrated empirically from `stream`.
    """
    observation = config.observation.to_distribution()
    mode = config.dependence
    if mode == "ctrw_cycle":
        from app.services.ctrw import sample_cycles

        if stream is None:
            raise ParameterError("stream", None, "provided for empirical calibration")
        wait = observation
        inter = calibrate_normalizer_empirical(
            lambda n: sample_cycles(wait, stream, n).y,
            config.n_cal,
            t_grid,
            alpha=0.5,
        )
        return JointModel(
            mda=None if wait.kind == "deterministic" else mda_for(wait),
            inter=inter,
            dependence=Dependence("ctrw_cycle", wait),
            observation=wait,
        )

    alpha = config.alpha
    interarrival = Distribution("pareto", alpha)
    if mode == "identical":
        observation = interarrival
    return JointModel(
        mda=mda_for(observation),
        inter=pareto_interarrival(alpha),
        dependence=Dependence(mode),
        observation=observation,
        interarrival=interarrival,
    )
