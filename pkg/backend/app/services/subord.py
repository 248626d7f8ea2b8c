"""
Subordinator Service - truncated alpha-stable subordinator, passage time of
level 1 and the largest jump completed before it.

Jumps form a Poisson random measure with intensity dt x alpha y**(-alpha-1) dy,
so the jumps above y over a span theta number Poisson(theta y**(-alpha)).
Jumps below eps are dropped; their expected total over [0, theta] is
theta alpha eps**(1-alpha) / (1-alpha), kept below the tolerance.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, NamedTuple, Optional, Tuple

import numpy as np

from app import settings
from app.services.errors import ParameterError, ToleranceError
from app.services.parallel import run_indexed
from app.services.rng import make_stream, uniform_open
from app.services.stats import EcdfBank

logger = logging.getLogger(__name__)

Method = Literal["series", "thinning"]

THETA0 = 2.0
REFINE_FACTOR = 10.0
MIN_BANK_SIZE = 10**4
# retry r of bank index i draws from stream offset + RETRY_STREAM + (r - 1) * RETRY_STRIDE + i
RETRY_STREAM = 2**43
RETRY_STRIDE = 2**32


@dataclass(frozen=True)
class SubordinatorRealization:
    alpha: float
    theta: float
    times: np.ndarray
    sizes: np.ndarray
    eps: float
    w: float
    v: float
    total: float
    method: Method

    @property
    def residual_bound(self) -> float:
        return truncation_bound(self.alpha, self.theta, self.eps)

    @property
    def passage_index(self) -> int:
        """Position of the jump that carries the path above 1."""
        return int(np.searchsorted(np.cumsum(self.sizes), 1.0, side="right"))


def truncation_bound(alpha: float, theta: float, eps: float) -> float:
    """Expected mass of the dropped jumps below eps over [0, theta]."""
    return theta * alpha * eps ** (1.0 - alpha) / (1.0 - alpha)


def truncation_level(alpha: float, theta: float, tol: float) -> float:
    """Largest eps whose truncation bound stays at or below tol."""
    eps = (tol * (1.0 - alpha) / (theta * alpha)) ** (1.0 / (1.0 - alpha))
    return eps * (1.0 - 1e-12)


# --- Jump generation ---

def _band_series(alpha: float, span: float, lower: float, upper: float, stream: np.random.Generator) -> np.ndarray:
    """Ranked jumps in (lower, upper] by inverting the tail of the Levy measure.

    Gamma_j are the points of a unit-rate Poisson process started at
    span * upper**(-alpha); size_j = (Gamma_j / span)**(-1/alpha).
    """
    start = 0.0 if math.isinf(upper) else span * upper ** (-alpha)
    stop = span * lower ** (-alpha)
    expected = stop - start
    chunks = []
    level = start
    while level <= stop:
        n = int(expected + 5.0 * math.sqrt(expected) + 16)
        gammas = level + np.cumsum(stream.standard_exponential(n))
        level = float(gammas[-1])
        chunks.append(gammas[gammas <= stop])
    gammas = np.concatenate(chunks)
    return (gammas / span) ** (-1.0 / alpha)


def _band_thinning(alpha: float, span: float, lower: float, upper: float, stream: np.random.Generator) -> np.ndarray:
    """Jumps in (lower, upper] by thinning a heavier Pareto(alpha/2) proposal."""
    proposal_alpha = alpha / 2.0
    mass = span * (alpha / proposal_alpha) * lower ** (-alpha)
    count = int(stream.poisson(mass))
    proposals = lower * uniform_open(stream, count) ** (-1.0 / proposal_alpha)
    accept = stream.random(count) < (proposals / lower) ** (proposal_alpha - alpha)
    kept = proposals[accept]
    return kept[kept <= upper]


def _band(method: Method, alpha: float, t0: float, t1: float, lower: float, upper: float, stream: np.random.Generator):
    span = t1 - t0
    if method == "series":
        sizes = _band_series(alpha, span, lower, upper, stream)
    else:
        sizes = _band_thinning(alpha, span, lower, upper, stream)
    times = t0 + span * stream.random(sizes.size)
    return times, sizes


def _expected_jumps(alpha: float, theta: float, eps: float) -> float:
    return theta * eps ** (-alpha)


# --- Passage ---

def _locate_passage(times: np.ndarray, sizes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    cumsum = np.cumsum(sizes)
    return times, sizes, cumsum, int(np.searchsorted(cumsum, 1.0, side="right"))


def simulate_passage(
    alpha: float,
    tol: Optional[float] = None,
    stream: Optional[np.random.Generator] = None,
    method: Method = "series",
    jump_cap: Optional[int] = None,
    theta0: float = THETA0,
) -> SubordinatorRealization:
    """One realization up to the passage of level 1.

    theta doubles by adding the jumps on (theta, 2 theta] until the sum
    crosses 1. When the truncated sum just before the crossing is within the
    truncation bound of 1, or no jump precedes the crossing, eps is divided
    by 10 and the missing band of small jumps is added.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha", alpha, "in (0, 1)")
    tol = settings.SUBORD_TOL if tol is None else tol
    if not tol > 0.0:
        raise ParameterError("tol", tol, "positive")
    if method not in ("series", "thinning"):
        raise ParameterError("method", method, "series or thinning")
    if stream is None:
        raise ParameterError("stream", None, "a numpy Generator")
    cap = settings.JUMP_CAP if jump_cap is None else jump_cap

    def check_cap(theta: float, eps: float) -> None:
        expected = _expected_jumps(alpha, theta, eps)
        if expected > cap:
            raise ToleranceError(tol, int(expected), cap)

    theta = theta0
    eps = truncation_level(alpha, theta, tol)
    check_cap(theta, eps)
    times, sizes = _band(method, alpha, 0.0, theta, eps, math.inf, stream)

    while True:
        times, sizes, cumsum, idx = _locate_passage(times, sizes)
        if idx >= sizes.size:
            # no passage yet: extend the span and lower eps for the new theta
            new_theta = 2.0 * theta
            new_eps = min(eps, truncation_level(alpha, new_theta, tol))
            check_cap(new_theta, new_eps)
            logger.debug(f"Passage not reached by theta={theta}; doubling")
            extra = [_band(method, alpha, theta, new_theta, new_eps, math.inf, stream)]
            if new_eps < eps:
                extra.append(_band(method, alpha, 0.0, theta, new_eps, eps, stream))
            times = np.concatenate([times] + [e[0] for e in extra])
            sizes = np.concatenate([sizes] + [e[1] for e in extra])
            theta, eps = new_theta, new_eps
            continue

        bound = truncation_bound(alpha, theta, eps)
        ambiguous = idx == 0 or 1.0 - cumsum[idx - 1] < bound
        if not ambiguous:
            break
        new_eps = eps / REFINE_FACTOR
        check_cap(theta, new_eps)
        logger.debug(f"Passage within truncation bound {bound:.3g}; refining eps to {new_eps:.3g}")
        band_times, band_sizes = _band(method, alpha, 0.0, theta, new_eps, eps, stream)
        times = np.concatenate([times, band_times])
        sizes = np.concatenate([sizes, band_sizes])
        eps = new_eps

    return SubordinatorRealization(
        alpha=alpha,
        theta=theta,
        times=times,
        sizes=sizes,
        eps=eps,
        w=float(times[idx]),
        v=float(np.max(sizes[:idx])),
        total=float(cumsum[-1]),
        method=method,
    )


# --- Banks ---

class PassageSamples(NamedTuple):
    v: np.ndarray
    w: np.ndarray
    retries: int


def _bank_stream(seed: int, offset: int, i: int, attempt: int) -> np.random.Generator:
    if attempt == 0:
        return make_stream(seed, offset + i)
    return make_stream(seed, offset + RETRY_STREAM + (attempt - 1) * RETRY_STRIDE + i)


def _passage_chunk(start: int, stop: int, alpha: float, tol: float, method: Method, seed: int, offset: int) -> List[Tuple[float, float, int]]:
    """(v, w, retries) per index; a realization over the jump cap is redrawn on its retry stream."""
    out = []
    for i in range(start, stop):
        attempt = 0
        while True:
            try:
                real = simulate_passage(alpha, tol, _bank_stream(seed, offset, i, attempt), method)
                break
            except ToleranceError:
                if attempt >= settings.SUBORD_RETRIES:
                    raise
                attempt += 1
                logger.debug(f"Bank index {i} over the jump cap; retry {attempt}")
        out.append((real.v, real.w, attempt))
    return out


def passage_samples(
    alpha: float,
    n_samples: int,
    seed: int,
    tol: Optional[float] = None,
    method: Method = "series",
    workers: int = 1,
) -> PassageSamples:
    """V and W from n_samples independent realizations on reserved streams."""
    tol = settings.SUBORD_TOL if tol is None else tol
    rows = run_indexed(_passage_chunk, n_samples, workers, alpha, tol, method, seed, settings.BANK_STREAM_OFFSET)
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    retries = int(arr[:, 2].sum())
    if retries:
        logger.warning(f"{retries} redraws over the jump cap in {n_samples} passage realizations")
    return PassageSamples(arr[:, 0], arr[:, 1], retries)


def largest_jump_law(
    alpha: float = 0.5,
    n_samples: int = MIN_BANK_SIZE,
    seed: int = 0,
    tol: Optional[float] = None,
    method: Method = "series",
    workers: int = 1,
) -> EcdfBank:
    """Bank of V, the largest jump completed before the passage of level 1."""
    if n_samples < MIN_BANK_SIZE:
        raise ParameterError("n_samples", n_samples, f">= {MIN_BANK_SIZE}")
    tol = settings.SUBORD_TOL if tol is None else tol
    samples = passage_samples(alpha, n_samples, seed, tol, method, workers)
    logger.info(f"V bank: alpha={alpha}, n={n_samples}, method={method}, tol={tol}, retries={samples.retries}")
    return EcdfBank(samples.v, {
        "law": "V", "alpha": alpha, "n": n_samples, "tol": tol, "seed": seed,
        "route": method, "retries": samples.retries,
    })
