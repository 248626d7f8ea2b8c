"""
Renewal Service - renewal paths, tau(t), partial sums and generalized inverses.

tau(t) = inf{k : Y_1 + ... + Y_k > t}. A path stores exactly tau(t) pairs, so
the last partial sum is the first one above the horizon.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from app import settings
from app.services.errors import ParameterError, ResourceCapError
from app.services.model import JointModel, joint_sample

logger = logging.getLogger(__name__)

DEFAULT_U_GRID = tuple(np.round(np.linspace(0.05, 1.0, 20), 2))


@dataclass(frozen=True)
class RenewalPath:
    """One trajectory up to the first partial sum above the horizon."""
    x: np.ndarray
    y: np.ndarray
    cumsum: np.ndarray
    tau: int
    horizon: float
    d_inv: float

    def partial_sum(self, k: int) -> float:
        """S_k with S_0 = 0."""
        return 0.0 if k == 0 else float(self.cumsum[k - 1])


# --- Core loop ---

def draw_until(
    draw: Callable[[int], Dict[str, np.ndarray]],
    t: float,
    cap: int,
    what: str,
    first_chunk: int = 64,
) -> Tuple[Dict[str, np.ndarray], np.ndarray, int]:
    """Draw batches until the cumulative sum of column 'y' exceeds t.

    Returns the columns truncated to tau rows, their cumulative sum and tau.
    Batches double in size, so the variates consumed from the stream depend
    only on the stream and t.
    """
    parts = []
    drawn = 0
    running = 0.0
    chunk = max(1, first_chunk)
    while True:
        if drawn >= cap:
            raise ResourceCapError(what, cap, drawn)
        batch = draw(min(chunk, cap - drawn))
        parts.append(batch)
        drawn += len(batch["y"])
        running += float(np.sum(batch["y"]))
        if running > t:
            columns = {key: np.concatenate([p[key] for p in parts]) for key in batch}
            cumsum = np.cumsum(columns["y"])
            idx = int(np.searchsorted(cumsum, t, side="right"))
            if idx < cumsum.size:
                tau = idx + 1
                return {key: col[:tau] for key, col in columns.items()}, cumsum[:tau], tau
        chunk *= 2


def simulate_until(
    model: JointModel,
    t: float,
    stream: np.random.Generator,
    tau_cap: Optional[int] = None,
) -> RenewalPath:
    """Simulate (X_i, Y_i) pairs until Y_1 + ... + Y_k first exceeds t."""
    if t < 0:
        raise ParameterError("t", t, "non-negative")
    cap = settings.TAU_CAP if tau_cap is None else tau_cap
    d_inv = float(model.inter.d_inv(t)) if t > 0 else 0.0

    def draw(n: int) -> Dict[str, np.ndarray]:
        x, y = joint_sample(model, stream, n)
        return {"x": np.asarray(x, dtype=float), "y": np.asarray(y, dtype=float)}

    columns, cumsum, tau = draw_until(draw, t, cap, "renewal tau", first_chunk=max(16, int(2 * d_inv) + 1))
    return RenewalPath(x=columns["x"], y=columns["y"], cumsum=cumsum, tau=tau, horizon=float(t), d_inv=d_inv)


# --- Functionals ---

def renewal_index(path: RenewalPath, level: float) -> int:
    """tau(level) for 0 <= level <= horizon, read off the simulated prefix."""
    if not 0.0 <= level <= path.horizon:
        raise ParameterError("level", level, f"in [0, {path.horizon}]")
    return int(np.searchsorted(path.cumsum, level, side="right")) + 1


def scaled_count(path: RenewalPath) -> float:
    """tau(t) / d_inv(t)."""
    if path.d_inv <= 0.0:
        raise ParameterError("horizon", path.horizon, "positive for a scaled count")
    return path.tau / path.d_inv


def time_change_path(path: RenewalPath) -> Tuple[np.ndarray, np.ndarray]:
    """The step function s -> T(d_inv(t) s) / t as (jump_points, values)."""
    if path.horizon <= 0.0:
        raise ParameterError("horizon", path.horizon, "positive")
    jump_points = np.arange(path.tau + 1) / path.d_inv
    values = np.concatenate(([0.0], path.cumsum)) / path.horizon
    return jump_points, values


def generalized_inverse(jump_points: Sequence[float], values: Sequence[float], u: float) -> float:
    """z^{<-}(u) = inf{s : z(s) > u} for a right-continuous nondecreasing step function.

    z equals values[j] on [jump_points[j], jump_points[j+1]).
    """
    points = np.asarray(jump_points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if points.shape != vals.shape or points.size == 0:
        raise ParameterError("jump_points", points.size, "the same nonzero length as values")
    if np.any(np.diff(points) <= 0):
        raise ParameterError("jump_points", "non-increasing", "strictly increasing")
    if np.any(np.diff(vals) < 0):
        raise ParameterError("values", "decreasing", "nondecreasing")
    idx = int(np.searchsorted(vals, u, side="right"))
    if idx >= vals.size:
        raise ParameterError("u", u, f"below sup z = {vals[-1]!r} (no finite inverse)")
    return float(points[idx])


def check_identities(path: RenewalPath, u_grid: Sequence[float] = DEFAULT_U_GRID) -> int:
    """Count sandwich and inverse-identity violations on one path."""
    violations = 0
    t = path.horizon
    if path.tau != path.y.size or path.tau != path.x.size:
        violations += 1
    if np.any(path.y <= 0.0) or np.any(np.diff(path.cumsum) <= 0.0):
        violations += 1
    if not (path.partial_sum(path.tau - 1) <= t < path.partial_sum(path.tau)):
        violations += 1
    if t > 0.0:
        jump_points, values = time_change_path(path)
        for u in u_grid:
            lhs = generalized_inverse(jump_points, values, u)
            rhs = renewal_index(path, t * u) / path.d_inv
            if lhs != rhs:
                violations += 1
    if violations:
        logger.error(f"Renewal identity violations on path with tau={path.tau}: {violations}")
    return violations
