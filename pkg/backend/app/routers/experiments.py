"""
Experiment Router - run a configured experiment and return its result rows.

Runs are synchronous and write no files; use the CLI for full acceptance
runs with CSV artifacts.
"""

from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException, Query

from app.routers.limits import to_http_error
from app.schemas import RunResponse
from app.services import harness
from app.services.errors import ConfigError, SimulationError

router = APIRouter(prefix="/experiments", tags=["experiments"])


@router.post("/run", response_model=RunResponse)
def run_experiment(config: Dict[str, Any] = Body(...), workers: int = Query(1, ge=1)):
    """Validate the config, run it and return the rows."""
    try:
        parsed = harness.parse_config(config, source="request")
        result = harness.run(parsed, workers=workers, write=False)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail={"message": str(e), "diagnostics": e.diagnostics})
    except SimulationError as e:
        raise to_http_error(e)
    return RunResponse(rows=result.rows, all_passed=result.all_passed)
