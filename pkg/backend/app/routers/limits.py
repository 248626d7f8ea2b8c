"""
Limit Law Router - read-only evaluation of the limiting distributions.
"""

from typing import Literal, Optional

from fastapi import APIRouter, HTTPException, Query

from app.schemas import LimitValue
from app.services import limits
from app.services.errors import (
    BankMissingError,
    ConfigError,
    ParameterError,
    PrecisionError,
    ResourceCapError,
    SimulationError,
    ToleranceError,
)
from app.services.model import MdaSpec, mda_for
from app.services.rng import Distribution

router = APIRouter(prefix="/limits", tags=["limits"])


def get_dependencies():
    """Shared bank store, imported at runtime to avoid circular imports."""
    from main import bank_store

    return {"bank_store": bank_store}


def to_http_error(exc: SimulationError) -> HTTPException:
    """Map service exceptions onto HTTP status codes."""
    if isinstance(exc, (ParameterError, ConfigError)):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, (PrecisionError, BankMissingError)):
        return HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, (ResourceCapError, ToleranceError)):
        return HTTPException(status_code=503, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


def _mda(family: str, beta: Optional[float], rate: float) -> MdaSpec:
    if family == "frechet":
        if beta is None:
            raise ParameterError("beta", None, "given for the Frechet family")
        return mda_for(Distribution("pareto", beta))
    return mda_for(Distribution("exponential", rate))


@router.get("/max-cdf", response_model=LimitValue)
def max_cdf(
    x: float,
    alpha: float = Query(0.5, gt=0, lt=1),
    family: Literal["gumbel", "frechet"] = "gumbel",
    beta: Optional[float] = Query(None, gt=0),
    rate: float = Query(1.0, gt=0),
    route: Literal["series", "monte_carlo"] = "series",
):
    """E[G(x)^W] by series or over the shared W bank."""
    try:
        mda = _mda(family, beta, rate)
        bank = get_dependencies()["bank_store"].w_bank(alpha) if route == "monte_carlo" else None
        law = limits.max_limit_law(mda, alpha, route, bank)
        return LimitValue(value=law.evaluate(x), error_estimate=law.error_estimate(x), route=route)
    except SimulationError as e:
        raise to_http_error(e)


@router.get("/kth-order", response_model=LimitValue)
def kth_order(
    k: int = Query(..., ge=1),
    lam: float = Query(..., ge=0),
    alpha: float = Query(0.5, gt=0, lt=1),
):
    """E[P(Poisson(W lam) <= k - 1)] over the shared W bank."""
    try:
        bank = get_dependencies()["bank_store"].w_bank(alpha)
        value, error = limits.kth_order_estimate(k, lam, bank)
        return LimitValue(value=value, error_estimate=error, route="monte_carlo")
    except SimulationError as e:
        raise to_http_error(e)


@router.get("/two-largest", response_model=LimitValue)
def two_largest(
    u1: float,
    u2: float,
    alpha: float = Query(0.5, gt=0, lt=1),
    family: Literal["gumbel", "frechet"] = "gumbel",
    beta: Optional[float] = Query(None, gt=0),
    rate: float = Query(1.0, gt=0),
    route: Literal["series", "monte_carlo"] = "monte_carlo",
):
    """Joint limit P(largest <= u1, second largest <= u2)."""
    try:
        mda = _mda(family, beta, rate)
        bank = get_dependencies()["bank_store"].w_bank(alpha) if route == "monte_carlo" else None
        value, error = limits.two_largest_estimate(alpha, mda, u1, u2, route, bank)
        return LimitValue(value=value, error_estimate=error, route=route)
    except SimulationError as e:
        raise to_http_error(e)


@router.get("/mittag-leffler")
def mittag_leffler(z: float = Query(..., le=0), alpha: float = Query(0.5, gt=0, le=1)):
    """E_alpha(z) for z <= 0."""
    try:
        return {"alpha": alpha, "z": z, "value": limits.mittag_leffler_fn(alpha, z)}
    except SimulationError as e:
        raise to_http_error(e)
