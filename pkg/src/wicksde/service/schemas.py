"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

DEFAULT_RESOLUTIONS = [8, 16, 32, 64, 128]


class ConvergeRequest(BaseModel):
    model: str
    schemes: list[str] = ["wick"]
    resolutions: list[int] = Field(default_factory=lambda: list(DEFAULT_RESOLUTIONS))
    n_ref: int = 1024
    n_paths: int = 20000
    seed: int = 42
    horizon: float = 1.0
    initial: float | None = None


class ExactnessRequest(BaseModel):
    model: str
    n: int = 64
    n_paths: int = 20000
    seed: int = 42
    horizon: float = 1.0
    initial: float | None = None
    tolerance: float = 1e-12


class Lemma1Request(BaseModel):
    model: str
    n: int = 32
    n_paths: int = 20000
    seed: int = 42
    horizon: float = 1.0
    initial: float | None = None


class GapRequest(BaseModel):
    model: str
    resolutions: list[int] = Field(default_factory=lambda: list(DEFAULT_RESOLUTIONS))
    n_paths: int = 20000
    seed: int = 42
    horizon: float = 1.0
    initial: float | None = None


class ValidateRequest(BaseModel):
    model: str
    probes: list[float] = Field(
        default_factory=lambda: [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
    )


class ErrorPoint(BaseModel):
    n: int
    mean_abs_error: float
    std_error: float


class RmsPoint(BaseModel):
    n: int
    rms_error: float


class ConvergenceOut(BaseModel):
    model: str
    scheme: str
    horizon: float
    seed: int
    n_paths: int
    points: list[ErrorPoint]
    fitted_order: float | None
    fit_intercept: float | None
    fit_r2: float | None
    exact: bool
    rms_points: list[RmsPoint]


class ConvergeResponse(BaseModel):
    reports: list[ConvergenceOut]


class ExactnessResponse(BaseModel):
    model: str
    scheme: str
    horizon: float
    seed: int
    n_paths: int
    n: int
    max_relative_deviation: float
    tolerance: float
    passed: bool


class Lemma1Point(BaseModel):
    k: int
    empirical: float
    std_error: float
    bound: float | None


class GapPoint(BaseModel):
    n: int
    empirical: float
    std_error: float
    bound: float | None


class ViolationOut(BaseModel):
    location: int
    empirical: float
    bound: float
    slack: float


class Lemma1Response(BaseModel):
    quantity: str
    model: str
    scheme: str
    horizon: float
    seed: int
    n_paths: int
    points: list[Lemma1Point]
    violations: list[ViolationOut]
    passed: bool


class GapResponse(BaseModel):
    quantity: str
    model: str
    scheme: str
    horizon: float
    seed: int
    n_paths: int
    points: list[GapPoint]
    violations: list[ViolationOut]
    passed: bool
    fitted_slope: float | None
    fit_r2: float | None
    exact_agreement: bool


class ModelViolationOut(BaseModel):
    invariant: str
    location: str
    observed: float
    allowed: float


class ValidateResponse(BaseModel):
    model: str
    probes: list[float]
    violations: list[ModelViolationOut]
    passed: bool


class ModelInfo(BaseModel):
    name: str
    notes: str
    default_initial: float


class ModelsResponse(BaseModel):
    models: list[ModelInfo]
