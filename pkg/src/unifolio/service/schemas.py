"""Request and response models for the experiment service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class FunctionClassSpec(BaseModel):
    family: Literal["threshold1d", "product_threshold", "finite"] = "threshold1d"
    dim: Optional[int] = None
    functions: Optional[list[dict]] = None
    n_states: Optional[int] = None

    def to_config(self) -> dict:
        out: dict = {"family": self.family}
        if self.dim is not None:
            out["dim"] = self.dim
        if self.functions is not None:
            out["functions"] = self.functions
        if self.n_states is not None:
            out["n_states"] = self.n_states
        return out


class BacktestRequest(BaseModel):
    csv_text: str
    function_class: FunctionClassSpec = Field(default_factory=FunctionClassSpec)
    side: str = "prev-first"
    samples: int = Field(default=10_000, ge=1)
    seed: int = 0
    input_name: Optional[str] = None
    timestamp: Optional[str] = None


class StrategyRow(BaseModel):
    name: str
    log_wealth: Optional[float]
    growth_factor: float
    stderr: Optional[float] = None
    method: str
    weights: Optional[list[float]] = None


class BacktestResponse(BaseModel):
    manifest: dict
    n_days: int
    n_stocks: int
    tickers: list[str]
    strategies: list[StrategyRow]
    state_strategies: dict
    per_epoch: Optional[list[dict]] = None
    trajectory: list[dict] = []
    warnings: list[str] = []


class CoverRequest(BaseModel):
    function_class: FunctionClassSpec = Field(default_factory=FunctionClassSpec)
    points: list[float] | list[list[float]]
    timestamp: Optional[str] = None


class CoverResponse(BaseModel):
    manifest: dict
    family: str
    parameters: list[dict]
    ell: int
    labels: list[list[int]]


class RhoRequest(BaseModel):
    process: dict = Field(default_factory=lambda: {"kind": "uniform"})
    function_class: FunctionClassSpec = Field(default_factory=FunctionClassSpec)
    horizons: list[int] = Field(default_factory=lambda: [64, 128, 256, 512, 1024])
    trials: int = Field(default=50, ge=1)
    seed: int = 0
    timestamp: Optional[str] = None


class RhoResponse(BaseModel):
    manifest: dict
    rows: list[dict]
    fitted_exponent: Optional[float]


class SimulateRequest(BaseModel):
    estimator: Literal["up", "statewise", "mixture"] = "mixture"
    csv_text: Optional[str] = None
    process: Optional[dict] = None
    horizon: Optional[int] = None
    function_class: FunctionClassSpec = Field(default_factory=FunctionClassSpec)
    side: str = "prev-first"
    threshold: float = 1.0
    samples: int = Field(default=10_000, ge=1)
    seed: int = 0
    exact: bool = False
    input_name: Optional[str] = None
    timestamp: Optional[str] = None


class SimulateResponse(BaseModel):
    manifest: dict
    log_wealth: Optional[float]
    stderr: Optional[float]
    method: str
    per_epoch: Optional[list[dict]] = None
    degenerate_draws: int = 0
    warnings: list[str] = []


class RegretSweepRequest(BaseModel):
    process: dict
    function_class: FunctionClassSpec = Field(default_factory=FunctionClassSpec)
    horizons: list[int] = Field(default_factory=lambda: [16, 32, 64])
    trials: int = Field(default=3, ge=1)
    seed: int = 0
    side: str = "prev-first"
    timestamp: Optional[str] = None


class RegretSweepResponse(BaseModel):
    manifest: dict
    rows: list[dict]


class HealthResponse(BaseModel):
    status: str
    version: str
