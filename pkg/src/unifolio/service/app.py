"""FastAPI application wiring the report builders to HTTP endpoints.

All endpoints are stateless pure computations; requests carry the full
experiment configuration (market CSV text inline) and responses embed the
reproducibility manifest.  Input errors map to 400, infeasible exact
computations to 409 with a Monte Carlo suggestion.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, reports
from ..covering import CoveringError
from ..data import IngestError, ProcessError
from ..portfolio import InfeasibleExactError, PortfolioError
from . import schemas

app = FastAPI(title="unifolio", version=__version__)


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InfeasibleExactError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except (IngestError, ProcessError, CoveringError, PortfolioError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/backtest", response_model=schemas.BacktestResponse)
def backtest(req: schemas.BacktestRequest):
    return _run(
        reports.backtest_report,
        csv_text=req.csv_text,
        function_class_spec=req.function_class.to_config(),
        side=req.side,
        samples=req.samples,
        seed=req.seed,
        input_name=req.input_name,
        timestamp=req.timestamp,
    )


@app.post("/cover", response_model=schemas.CoverResponse)
def cover(req: schemas.CoverRequest):
    return _run(
        reports.cover_report,
        function_class_spec=req.function_class.to_config(),
        points=req.points,
        timestamp=req.timestamp,
    )


@app.post("/rho", response_model=schemas.RhoResponse)
def rho(req: schemas.RhoRequest):
    return _run(
        reports.rho_report,
        side_process_spec=req.process,
        function_class_spec=req.function_class.to_config(),
        horizons=req.horizons,
        trials=req.trials,
        seed=req.seed,
        timestamp=req.timestamp,
    )


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    return _run(
        reports.simulate_report,
        estimator=req.estimator,
        csv_text=req.csv_text,
        process_spec=req.process,
        horizon=req.horizon,
        function_class_spec=req.function_class.to_config(),
        side=req.side,
        threshold=req.threshold,
        samples=req.samples,
        seed=req.seed,
        exact=req.exact,
        input_name=req.input_name,
        timestamp=req.timestamp,
    )


@app.post("/regret-sweep", response_model=schemas.RegretSweepResponse)
def regret_sweep(req: schemas.RegretSweepRequest):
    return _run(
        reports.regret_sweep_report,
        process_spec=req.process,
        function_class_spec=req.function_class.to_config(),
        horizons=req.horizons,
        trials=req.trials,
        seed=req.seed,
        side=req.side,
        timestamp=req.timestamp,
    )
