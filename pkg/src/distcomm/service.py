"""HTTP service exposing the experiment pipeline.

Each endpoint takes the same JSON config document the CLI consumes and
returns the result table as JSON (plus the CSV rendering, so service output
can be diffed against CLI output byte for byte).
"""
from __future__ import annotations

from typing import List, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import ExperimentConfigModel, build_experiment
from .errors import ConfigError
from .harness import (certify_table, exponent_table, format_csv, rd_table,
                      simulate_table, sweep_table)

app = FastAPI(title="distcomm",
              description="rate-distortion channel-coding experiments")

Cell = Union[int, float, str]


class TableResponse(BaseModel):
    columns: List[str]
    rows: List[List[Cell]]
    csv: str


class RdRequest(ExperimentConfigModel):
    points: Optional[int] = 33


class ExponentRequest(ExperimentConfigModel):
    eps_values: Optional[List[float]] = None


def _table_response(header, rows) -> TableResponse:
    clean = [[int(c) if isinstance(c, bool) else c for c in row]
             for row in rows]
    return TableResponse(columns=header, rows=clean,
                         csv=format_csv(header, rows))


def _experiment(model: ExperimentConfigModel):
    try:
        return build_experiment(model)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/healthz")
def healthz():
    return {"status": "ok"}


@app.post("/rd", response_model=TableResponse)
def rd(req: RdRequest):
    cfg = _experiment(req)
    header, rows = rd_table(cfg, req.points or 33)
    return _table_response(header, rows)


@app.post("/exponent", response_model=TableResponse)
def exponent(req: ExponentRequest):
    cfg = _experiment(req)
    header, rows = exponent_table(cfg, req.eps_values or [0.0, 0.05, 0.1])
    return _table_response(header, rows)


@app.post("/simulate", response_model=TableResponse)
def simulate(req: ExperimentConfigModel):
    cfg = _experiment(req)
    header, rows = simulate_table(cfg)
    return _table_response(header, rows)


@app.post("/sweep", response_model=TableResponse)
def sweep(req: ExperimentConfigModel):
    if req.sweep is None:
        raise HTTPException(status_code=422,
                            detail="request needs a 'sweep' section")
    cfg = _experiment(req)
    header, rows = sweep_table(cfg, req.sweep.axis, req.sweep.values)
    return _table_response(header, rows)


@app.post("/certify", response_model=TableResponse)
def certify(req: ExperimentConfigModel):
    cfg = _experiment(req)
    try:
        header, rows = certify_table(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return _table_response(header, rows)
