"""
CTRW Service - continuous-time simple random walk at cycle and step level.

A cycle starts when the walk arrives at zero: it sits there for one waiting
time X, then leaves and needs K - 1 more jumps (each after a fresh wait) to
come back. R is the sum of those K - 1 waits and Y = X + R.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterator, Literal, Optional

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.stats import levy_stable

from app import settings
from app.services.errors import ParameterError, ResourceCapError
from app.services.renewal import draw_until
from app.services.rng import Distribution, uniform_open

logger = logging.getLogger(__name__)

Fidelity = Literal["cycle", "step"]

# keeps 2 * n inside int64
_MAX_HALF_RETURN = 2**61
# elements per literal summation batch
_LITERAL_BATCH = 2**22


# --- First return time K ---

@lru_cache(maxsize=4)
def first_return_tail_table(n_max: int) -> np.ndarray:
    """q[n] = P(K > 2n) = C(2n, n) 2**(-2n) for n = 0..n_max.

    Built by q[n] = q[n-1] (2n - 1) / (2n), which never over- or underflows.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    q = np.empty(n_max + 1)
    q[0] = 1.0
    q[1:] = np.cumprod((2.0 * n - 1.0) / (2.0 * n))
    q.setflags(write=False)
    return q


def first_return_tail(n: int) -> float:
    """P(K > 2n); beyond the table the asymptote 1/sqrt(pi n) is used."""
    if n < 0:
        raise ParameterError("n", n, "non-negative")
    q = first_return_tail_table(settings.K_TABLE_SIZE)
    if n < q.size:
        return float(q[n])
    return 1.0 / math.sqrt(math.pi * n)


def _first_return_exact(stream: np.random.Generator, size: int) -> np.ndarray:
    q = first_return_tail_table(settings.K_TABLE_SIZE)
    n_max = q.size - 1
    u = np.atleast_1d(uniform_open(stream, size))
    # first n with q[n] < u; q is decreasing so -q is sorted ascending
    half = np.searchsorted(-q, -u, side="right").astype(np.int64)
    beyond = half > n_max
    if np.any(beyond):
        tail_n = np.floor(1.0 / (math.pi * u[beyond] ** 2)) + 1.0
        tail_n = np.clip(tail_n, n_max + 1, _MAX_HALF_RETURN)
        half[beyond] = tail_n.astype(np.int64)
    return 2 * half


def _first_return_walk(stream: np.random.Generator, step_cap: int) -> int:
    position = 0
    steps = 0
    chunk = 64
    while True:
        if steps >= step_cap:
            raise ResourceCapError("walk steps", step_cap, steps)
        n = min(chunk, step_cap - steps)
        path = position + np.cumsum(2 * stream.integers(0, 2, size=n) - 1)
        zeros = np.flatnonzero(path == 0)
        if zeros.size:
            return steps + int(zeros[0]) + 1
        steps += n
        position = int(path[-1])
        chunk = min(chunk * 2, 2**20)


def sample_first_return(
    stream: np.random.Generator,
    mode: Literal["exact", "walk"] = "exact",
    size: Optional[int] = None,
    step_cap: Optional[int] = None,
):
    """First return time to 0 of the simple symmetric random walk.

    exact: inverse transform on the tail table; walk: literal steps.
    Returns an int when size is None, otherwise an int64 array.
    """
    if mode == "exact":
        k = _first_return_exact(stream, 1 if size is None else size)
        return int(k[0]) if size is None else k
    if mode != "walk":
        raise ParameterError("mode", mode, "exact or walk")
    cap = settings.WALK_STEP_CAP if step_cap is None else step_cap
    if size is None:
        return _first_return_walk(stream, cap)
    return np.array([_first_return_walk(stream, cap) for _ in range(size)], dtype=np.int64)


# --- Sums of waiting times ---

def _approximate_sums(wait: Distribution, c: np.ndarray, stream: np.random.Generator) -> np.ndarray:
    """Limit-law draws for sums of c iid waits, c above GAUSS_THRESHOLD.

    Finite variance (and the Pareto(2) boundary, with its log-corrected
    scale) gives a normal. A Pareto(beta) tail with beta < 2, beta != 1 gives
    c * mean + c**(1/beta) * L with L totally skewed beta-stable of scale
    (Gamma(1 - beta) cos(pi beta / 2))**(1/beta), mean 0 when beta > 1.
    """
    if math.isfinite(wait.variance):
        return c * wait.mean + np.sqrt(c * wait.variance) * stream.standard_normal(c.size)
    beta = wait.param
    if beta == 2.0:
        return c * wait.mean + np.sqrt(c * np.log(c)) * stream.standard_normal(c.size)
    if beta == 1.0:
        raise ParameterError("wait", wait, "a tail index other than 1 for sums above the approximation threshold")
    scale = (gamma_fn(1.0 - beta) * math.cos(math.pi * beta / 2.0)) ** (1.0 / beta)
    shocks = levy_stable.rvs(beta, 1.0, loc=0.0, scale=scale, size=c.size, random_state=stream)
    centre = c * wait.mean if beta > 1.0 else 0.0
    return centre + c ** (1.0 / beta) * np.asarray(shocks, dtype=float)


def sum_of_waits(wait: Distribution, counts: np.ndarray, stream: np.random.Generator) -> np.ndarray:
    """For each count c, the sum of c iid waits (0 when c == 0).

    Exponential sums are Gamma variates and deterministic sums are exact.
    Other laws are summed literally up to GAUSS_THRESHOLD terms and replaced
    by a draw from the normal or stable limit of the sum above it.
    """
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros(counts.shape)
    positive = counts > 0
    if not np.any(positive):
        return out
    if wait.kind == "exponential":
        out[positive] = stream.gamma(counts[positive].astype(float), 1.0 / wait.param)
        return out
    if wait.kind == "deterministic":
        out[positive] = counts[positive] * wait.param
        return out

    threshold = settings.GAUSS_THRESHOLD
    big = positive & (counts > threshold)
    small = np.flatnonzero(positive & ~big)
    start = 0
    while start < small.size:
        # group entries so one batch stays below _LITERAL_BATCH draws
        running = np.cumsum(counts[small[start:]])
        stop = start + max(1, int(np.searchsorted(running, _LITERAL_BATCH, side="right")))
        group = small[start:stop]
        draws = wait.sample(stream, int(counts[group].sum()))
        offsets = np.concatenate(([0], np.cumsum(counts[group])[:-1]))
        out[group] = np.add.reduceat(draws, offsets)
        start = stop
    if np.any(big):
        c = counts[big].astype(float)
        approx = _approximate_sums(wait, c, stream)
        # sums of Pareto waits are at least the count
        out[big] = np.maximum(approx, c if wait.kind == "pareto" else np.finfo(float).tiny)
        logger.warning(f"Limit-law approximation used for {int(big.sum())} excursion sums above {threshold} steps")
    return out


# --- Cycles ---

@dataclass(frozen=True)
class CtrwCycleRecord:
    x: float
    k: int
    r: float
    y: float
    a_end: float


@dataclass(frozen=True)
class CycleBatch:
    """Column arrays of cycles; y = x + r elementwise."""
    x: np.ndarray
    k: np.ndarray
    r: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.x + self.r

    def __len__(self) -> int:
        return int(self.x.size)


def sample_cycles(wait: Distribution, stream: np.random.Generator, size: int) -> CycleBatch:
    """iid cycles (X, K, R) under the exact first-return law."""
    if size < 1:
        raise ParameterError("size", size, ">= 1")
    x = np.atleast_1d(np.asarray(wait.sample(stream, size), dtype=float))
    k = _first_return_exact(stream, size)
    r = sum_of_waits(wait, k - 1, stream)
    return CycleBatch(x=x, k=k, r=r)


@dataclass(frozen=True)
class CtrwPathSummary:
    """The cycles of one path up to the first return epoch above t."""
    x: np.ndarray
    k: np.ndarray
    r: np.ndarray
    y: np.ndarray
    a_end: np.ndarray
    horizon: float
    tau: int
    q: float
    m_tau: float
    m_tau_minus: float
    longest_excursion: float

    @property
    def cycles(self) -> Iterator[CtrwCycleRecord]:
        for i in range(self.tau):
            yield CtrwCycleRecord(
                x=float(self.x[i]), k=int(self.k[i]), r=float(self.r[i]),
                y=float(self.y[i]), a_end=float(self.a_end[i]),
            )

    @property
    def previous_return(self) -> float:
        """A_{tau-1}, the start of the straddling cycle."""
        return float(self.a_end[self.tau - 2]) if self.tau > 1 else 0.0


def _summarize(x: np.ndarray, k: np.ndarray, r: np.ndarray, t: float) -> CtrwPathSummary:
    y = x + r
    a_end = np.cumsum(y)
    tau = int(x.size)
    m_tau = float(np.max(x))
    m_tau_minus = float(np.max(x[:-1])) if tau > 1 else 0.0
    longest_excursion = float(np.max(r[:-1])) if tau > 1 else 0.0
    partial = CtrwPathSummary(
        x=x, k=k, r=r, y=y, a_end=a_end, horizon=float(t), tau=tau, q=math.nan,
        m_tau=m_tau, m_tau_minus=m_tau_minus, longest_excursion=longest_excursion,
    )
    return replace(partial, q=longest_sojourn(partial))


def _simulate_by_cycles(wait: Distribution, t: float, stream: np.random.Generator, cycle_cap: int) -> CtrwPathSummary:
    def draw(n: int):
        batch = sample_cycles(wait, stream, n)
        return {"x": batch.x, "k": batch.k, "r": batch.r, "y": batch.y}

    columns, _, _ = draw_until(draw, t, cycle_cap, "ctrw cycles", first_chunk=16)
    return _summarize(columns["x"], columns["k"], columns["r"], t)


def _simulate_by_steps(wait: Distribution, t: float, stream: np.random.Generator, step_cap: int) -> CtrwPathSummary:
    """Literal walk up to t; the straddling cycle is completed exactly."""
    waits, jump_times, n_wait = draw_until(
        lambda n: {"y": np.atleast_1d(np.asarray(wait.sample(stream, n), dtype=float))},
        t, step_cap + 1, "walk steps",
    )
    e = waits["y"]
    n_t = n_wait - 1  # jumps made by time t
    position = np.concatenate(([0], np.cumsum(2 * stream.integers(0, 2, size=n_t) - 1)))
    # time of the j-th jump, with 0 for j = 0
    at = np.concatenate(([0.0], jump_times))
    zeros = np.flatnonzero(position == 0)

    starts = zeros
    ends = np.append(zeros[1:], -1)
    x = e[starts]
    k = np.empty(starts.size, dtype=np.int64)
    r = np.empty(starts.size)
    k[:-1] = ends[:-1] - starts[:-1]
    r[:-1] = at[ends[:-1]] - at[starts[:-1] + 1]

    last = int(starts[-1])
    level = int(abs(position[n_t]))
    if last == n_t:
        k_last = int(_first_return_exact(stream, 1)[0])
        k[-1] = k_last
        r[-1] = sum_of_waits(wait, np.array([k_last - 1]), stream)[0]
    else:
        # first passage from level to 0 is a sum of level iid copies of K - 1
        remaining = int(np.sum(_first_return_exact(stream, level) - 1))
        k[-1] = n_t + remaining - last
        fresh = sum_of_waits(wait, np.array([remaining - 1]), stream)[0]
        r[-1] = (at[n_t + 1] - at[last + 1]) + fresh
    return _summarize(x, k, r, t)


def simulate_cycles(
    wait: Distribution,
    t: float,
    stream: np.random.Generator,
    fidelity: Fidelity = "cycle",
    cycle_cap: Optional[int] = None,
    step_cap: Optional[int] = None,
) -> CtrwPathSummary:
    """Simulate one CTRW path until its first return to zero after time t."""
    if t <= 0:
        raise ParameterError("t", t, "positive")
    if not math.isfinite(wait.mean):
        raise ParameterError("wait", wait, "a law with finite mean")
    if fidelity == "cycle":
        return _simulate_by_cycles(wait, t, stream, settings.CYCLE_CAP if cycle_cap is None else cycle_cap)
    if fidelity == "step":
        return _simulate_by_steps(wait, t, stream, settings.WALK_STEP_CAP if step_cap is None else step_cap)
    raise ParameterError("fidelity", fidelity, "cycle or step")


# --- Functionals ---

def longest_sojourn(summary: CtrwPathSummary) -> float:
    """Q(t): the longest stay at zero up to t, counting the part in progress."""
    prev = summary.previous_return
    last = float(summary.x[summary.tau - 1])
    if prev + last < summary.horizon:
        return summary.m_tau
    return max(summary.m_tau_minus, summary.horizon - prev)


def sojourn_set(summary: CtrwPathSummary) -> np.ndarray:
    """All sojourn durations up to t, the last one clipped at t."""
    out = summary.x.copy()
    prev = summary.previous_return
    if prev + out[-1] >= summary.horizon:
        out[-1] = summary.horizon - prev
    return out
