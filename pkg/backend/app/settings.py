"""
Settings Module - environment-driven defaults for the simulation library.

Values are read once at import time. A `.env` file next to the backend is
honoured through python-dotenv; explicit environment variables win.
"""

import os

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    """Read an integer setting, accepting float notation such as 1e9."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    return int(float(raw))


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    return float(raw)


# --- Resource caps ---

TAU_CAP = _int_env("SIM_TAU_CAP", 10**9)
WALK_STEP_CAP = _int_env("SIM_WALK_STEP_CAP", 10**8)
CYCLE_CAP = _int_env("SIM_CYCLE_CAP", 10**8)
JUMP_CAP = _int_env("SIM_JUMP_CAP", 5 * 10**7)
SUBORD_RETRIES = _int_env("SIM_SUBORD_RETRIES", 8)

# --- Numerical defaults ---

SUBORD_TOL = _float_env("SIM_SUBORD_TOL", 1e-4)
GAUSS_THRESHOLD = _int_env("SIM_GAUSS_THRESHOLD", 10**6)
K_TABLE_SIZE = _int_env("SIM_K_TABLE_SIZE", 10**6)
ML_MAX_DIGITS = _int_env("SIM_ML_MAX_DIGITS", 400)

# --- Harness defaults ---

WORKERS = _int_env("SIM_WORKERS", 1)
W_BANK_SIZE = _int_env("SIM_W_BANK_SIZE", 10**5)
V_BANK_SIZE = _int_env("SIM_V_BANK_SIZE", 10**4)
OUTPUT_DIR = os.getenv("SIM_OUTPUT_DIR", "results")
BANK_DIR = os.getenv("SIM_BANK_DIR") or None
LOG_LEVEL = os.getenv("SIM_LOG_LEVEL", "INFO").upper()

# Limit-law banks draw from stream indices at and above this offset so they
# never collide with replication streams.
BANK_STREAM_OFFSET = 2**48
