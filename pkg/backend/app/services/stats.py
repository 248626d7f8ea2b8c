"""
Stats Service - empirical CDF banks, KS/DKW metrics and tail diagnostics.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats as sps

from app.services.errors import InsufficientDataError, ParameterError

logger = logging.getLogger(__name__)

MIN_EXCEEDANCES = 100
LAW_GRID_POINTS = 2000


# --- Empirical CDF bank ---

@dataclass(frozen=True)
class EcdfBank:
    """Sorted sample with its provenance (seed, model, t, reps, ...)."""
    values: np.ndarray
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))
        if values.size < 1:
            raise InsufficientDataError("EcdfBank", 0, 1)
        if np.any(np.isnan(values)):
            raise ParameterError("values", "NaN", "free of NaN")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, samples: Sequence[float], **provenance) -> "EcdfBank":
        return cls(np.asarray(samples, dtype=float), dict(provenance))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def evaluate(self, x):
        """F_n(x) = #{values <= x} / n."""
        out = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_left(self, x):
        """F_n(x-) = #{values < x} / n."""
        out = np.searchsorted(self.values, np.asarray(x, dtype=float), side="left") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, p):
        """Left-continuous inverse: the smallest value with F_n >= p."""
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0.0) or np.any(p_arr > 1.0):
            raise ParameterError("p", p, "in (0, 1]")
        idx = np.ceil(p_arr * self.n - 1e-9).astype(np.int64) - 1
        out = self.values[np.clip(idx, 0, self.n - 1)]
        return float(out) if np.ndim(out) == 0 else out

    def save(self, path: Union[str, Path]) -> Path:
        """Write '# key=value,...' then a 'value' column."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = ",".join(f"{k}={v}" for k, v in self.provenance.items())
        with open(path, "w", newline="") as f:
            f.write(f"# {meta}\n")
            pd.DataFrame({"value": self.values}).to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EcdfBank":
        path = Path(path)
        with open(path) as f:
            first = f.readline().strip()
        provenance: Dict[str, object] = {}
        if first.startswith("#"):
            for item in first.lstrip("# ").split(","):
                if "=" in item:
                    key, value = item.split("=", 1)
                    provenance[key.strip()] = _parse_scalar(value.strip())
        frame = pd.read_csv(path, skiprows=1 if first.startswith("#") else 0)
        if "value" not in frame.columns:
            raise ParameterError("bank file", str(path), "a CSV with a 'value' column")
        return cls(frame["value"].to_numpy(dtype=float), provenance)


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


# --- Distances ---

def law_grid(bank: EcdfBank, points: int = LAW_GRID_POINTS) -> np.ndarray:
    """Evaluation grid for ECDF-vs-law distances: the bank itself or its quantiles."""
    unique = np.unique(bank.values)
    if unique.size <= points:
        return unique
    return np.unique(bank.quantile((np.arange(points) + 0.5) / points))


def ks_distance(bank: EcdfBank, other) -> float:
    """Sup distance between an ECDF and another ECDF or a law with .evaluate."""
    if isinstance(other, EcdfBank):
        return float(sps.ks_2samp(bank.values, other.values).statistic)
    grid = law_grid(bank)
    law_values = np.asarray(other.evaluate(grid), dtype=float)
    upper = np.abs(bank.evaluate(grid) - law_values)
    lower = np.abs(bank.evaluate_left(grid) - law_values)
    return float(min(1.0, max(upper.max(), lower.max())))


def dkw_epsilon(n: int, delta: float) -> float:
    """Half-width of the DKW band at confidence 1 - delta."""
    if n < 1:
        raise ParameterError("n", n, ">= 1")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta", delta, "in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def chi2_uniformity_pvalue(times: Sequence[float], bins: int = 10) -> float:
    """p-value of a chi-square test that times in [0, 1] are uniform."""
    times = np.asarray(times, dtype=float)
    if times.size < 5 * bins:
        raise InsufficientDataError("uniformity test points", int(times.size), 5 * bins)
    counts, _ = np.histogram(np.clip(times, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return float(sps.chisquare(counts).pvalue)


# --- Tail diagnostics ---

def upper_threshold(values: np.ndarray, k: int) -> float:
    """The (k+1)-th largest value, so exactly k values lie strictly above it when untied."""
    n = values.size
    if not 0 <= k < n:
        raise ParameterError("k", k, f"in [0, {n})")
    return float(np.partition(values, n - k - 1)[n - k - 1])


def tail_dependence_estimate(xs: Sequence[float], ys: Sequence[float], q: float) -> float:
    """P(X > U_X(q) | Y > U_Y(q)) with empirical q-quantile thresholds."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ParameterError("xs", xs.shape, f"the same shape as ys {ys.shape}")
    if not 0.9 < q < 1.0:
        raise ParameterError("q", q, "in (0.9, 1)")
    k = int(round(xs.size * (1.0 - q)))
    if k < MIN_EXCEEDANCES:
        raise InsufficientDataError("tail exceedances", k, MIN_EXCEEDANCES)
    y_hit = ys > upper_threshold(ys, k)
    x_hit = xs > upper_threshold(xs, k)
    n_y = int(np.count_nonzero(y_hit))
    if n_y == 0:
        raise InsufficientDataError("Y exceedances", 0, 1)
    return float(np.count_nonzero(x_hit & y_hit) / n_y)


def conditional_exceedance_curve(
    xs: Sequence[float],
    ys: Sequence[float],
    q_y: float,
    x_quantiles: Sequence[float],
) -> np.ndarray:
    """P(X > x_p | Y > y_q) for each X-quantile level p."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k = int(round(ys.size * (1.0 - q_y)))
    if k < MIN_EXCEEDANCES:
        raise InsufficientDataError("Y exceedances", k, MIN_EXCEEDANCES)
    y_hit = ys > upper_threshold(ys, k)
    x_given = xs[y_hit]
    levels = np.quantile(xs, np.asarray(x_quantiles, dtype=float))
    return np.array([np.count_nonzero(x_given > level) / x_given.size for level in levels])


def hill_estimate(values: Sequence[float], k: int) -> float:
    """Tail index from the k largest values: 1 / mean(log(X_(i) / X_(k+1)))."""
    ordered = np.sort(np.asarray(values, dtype=float))[::-1]
    if not 1 <= k < ordered.size:
        raise ParameterError("k", k, f"in [1, {ordered.size})")
    if ordered[k] <= 0.0:
        raise ParameterError("values", ordered[k], "positive in the upper tail")
    excess = np.mean(np.log(ordered[:k]) - np.log(ordered[k]))
    return float(1.0 / excess)
