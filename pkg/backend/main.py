"""
Heavy-Tailed Renewal Extremes API - Main Entry Point

This module sets up the FastAPI application and includes routers.
Simulation and limit-law logic lives in the services layer; W sample banks
are built lazily and shared across requests.
"""

import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app import settings
from app.banks import BankStore
from app.routers import experiments_router, limits_router

__version__ = "1.0.0"

# --- Configuration ---

logging.basicConfig(level=settings.LOG_LEVEL)
logger = logging.getLogger(__name__)


# --- Shared State ---

bank_store = BankStore(settings.BANK_DIR)


# --- Lifespan (startup/shutdown) ---

@asynccontextmanager
async def lifespan(app: FastAPI):
    """Log the active caps on startup and drop cached banks on shutdown."""
    logger.info(
        f"Starting with tau cap {settings.TAU_CAP}, W bank size {settings.W_BANK_SIZE}, "
        f"bank dir {settings.BANK_DIR or '<memory>'}"
    )
    yield
    bank_store.clear()


# --- App Setup ---

app = FastAPI(
    title="Heavy-Tailed Renewal Extremes API",
    description="Limit laws and Monte Carlo experiments for extremes of renewal-sampled sequences",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(limits_router)
app.include_router(experiments_router)


# --- Health Check ---

@app.get("/health")
async def health_check():
    """Health check with cache info."""
    return {
        "status": "healthy",
        "version": __version__,
        "cached_banks": len(bank_store),
    }


# --- Entry Point ---

if __name__ == "__main__":
    import uvicorn
    port = int(os.getenv("PORT", 8080))
    uvicorn.run(app, host="0.0.0.0", port=port)
