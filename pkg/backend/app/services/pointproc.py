"""
Point Process Service - the scaled point set of one renewal path.

Point i of a path is (i / d_inv(t), (X_i - b~(t)) / a~(t), Y_i / t). The
closed set keeps i <= tau(t), the open set drops the point at i = tau(t).
"""

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from app.services.errors import ParameterError
from app.services.model import JointModel
from app.services.renewal import RenewalPath

logger = logging.getLogger(__name__)

Boundary = Literal["closed", "open"]


@dataclass(frozen=True)
class ScaledPointSet:
    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    boundary: Boundary
    window_end: float

    def __len__(self) -> int:
        return int(self.u.size)


def extract(path: RenewalPath, model: JointModel, boundary: Boundary = "closed") -> ScaledPointSet:
    """Scale a renewal path into its point set on [0, tau(t) / d_inv(t)]."""
    if boundary not in ("closed", "open"):
        raise ParameterError("boundary", boundary, "closed or open")
    if path.d_inv <= 0.0:
        raise ParameterError("horizon", path.horizon, "positive")
    n = path.tau if boundary == "closed" else path.tau - 1
    a_t = model.a_tilde(path.horizon)
    b_t = model.b_tilde(path.horizon)
    idx = np.arange(1, n + 1)
    return ScaledPointSet(
        u=idx / path.d_inv,
        x=(path.x[:n] - b_t) / a_t,
        y=path.y[:n] / path.horizon,
        boundary=boundary,
        window_end=path.tau / path.d_inv,
    )


def kth_max(pset: ScaledPointSet, k: int) -> float:
    """The k-th largest x~ coordinate, or -inf when the set has fewer than k points."""
    if k < 1:
        raise ParameterError("k", k, ">= 1")
    if k > len(pset):
        return -np.inf
    return float(np.partition(pset.x, len(pset) - k)[len(pset) - k])


def count_exceed(pset: ScaledPointSet, x: float) -> int:
    """Number of points with x~ > x."""
    return int(np.count_nonzero(pset.x > x))


def exceedance_times(pset: ScaledPointSet, x0: float) -> np.ndarray:
    """Time coordinates of points above x0, rescaled to [0, 1] by window_end."""
    return pset.u[pset.x > x0] / pset.window_end


def max_equivalence_violations(pset: ScaledPointSet, xs: Sequence[float]) -> int:
    """Count thresholds where {no point above x} and {max <= x} disagree."""
    top = kth_max(pset, 1)
    violations = sum(1 for x in xs if (count_exceed(pset, x) == 0) != (top <= x))
    if violations:
        logger.error(f"Max/point-count equivalence failed at {violations} thresholds")
    return violations
