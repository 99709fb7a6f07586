"""HTTP face of the toolkit.

POST /run integrates a scenario and returns the report plus rendered
artifacts; POST /verify runs the algebraic pre-flight checks. The command
line talks to this app in process, so both entry points execute exactly
the same code path. Configuration problems map to 400, integration
failures to 500.
"""

from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, reporting, scenarios
from .errors import ConfigError, RegulataError, SimulationError


class RunRequest(BaseModel):
    config: dict


class RunResponse(BaseModel):
    report: dict
    csv: Optional[str] = None
    svgs: Dict[str, str] = Field(default_factory=dict)


class VerifyRequest(BaseModel):
    config: dict
    seed: int = 0


class CheckRow(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    checks: List[CheckRow]


app = FastAPI(title="regulata", version=__version__)


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest):
    try:
        cfg = scenarios.parse_config(req.config)
        traj, report = scenarios.run_scenario(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except (SimulationError, RegulataError) as exc:
        raise HTTPException(status_code=500, detail=str(exc))
    arts = reporting.scenario_artifacts(cfg, traj, report)
    return RunResponse(
        report=reporting.json_safe(report),
        csv=arts["csv"],
        svgs=arts["svgs"],
    )


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest):
    try:
        cfg = scenarios.parse_config(req.config)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    passed, rows = scenarios.verify_scenario(cfg, seed=req.seed)
    return VerifyResponse(passed=passed, checks=[CheckRow(**row) for row in rows])
