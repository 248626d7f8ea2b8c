"""API Routers package."""
from .limits import router as limits_router
from .experiments import router as experiments_router

__all__ = ["limits_router", "experiments_router"]
