"""FastAPI service exposing the Monte Carlo analysis layer.

Stateless request/response compute: every endpoint resolves a model from its
spec string, runs the corresponding analysis operation, and returns the JSON
report.  Configuration errors (unknown model, bad resolutions) come back as
422; numeric failures (too many aborted paths) as 500.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import analysis, models
from ..models import ModelCatalogEntry
from ..schemes import SchemeKind
from . import schemas


def _resolve(model_spec: str, initial: float | None) -> tuple[ModelCatalogEntry, float]:
    try:
        entry = models.resolve_model(model_spec)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    a = entry.default_initial if initial is None else float(initial)
    return entry, a


def _parse_scheme(text: str) -> SchemeKind:
    try:
        return SchemeKind.parse(text)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(
        title="wicksde",
        description=(
            "Strong-approximation studies for drift-less scalar Ito SDEs: "
            "Wick-exponential scheme, Euler-Maruyama/Milstein baselines, "
            "convergence and bound checks."
        ),
        version="0.1.0",
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/models", response_model=schemas.ModelsResponse)
    def list_models():
        return {
            "models": [
                {
                    "name": e.name,
                    "notes": e.notes,
                    "default_initial": e.default_initial,
                }
                for e in models.catalog()
            ]
        }

    @app.post("/converge", response_model=schemas.ConvergeResponse)
    def converge(req: schemas.ConvergeRequest):
        entry, a = _resolve(req.model, req.initial)
        kinds = [_parse_scheme(s) for s in req.schemes]
        reports = []
        for kind in kinds:
            try:
                report = analysis.convergence_study(
                    entry.diffusion,
                    a,
                    kind,
                    req.resolutions,
                    req.n_ref,
                    req.n_paths,
                    req.seed,
                    horizon=req.horizon,
                    model_name=req.model,
                )
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            except analysis.PathFailureError as exc:
                raise HTTPException(status_code=500, detail=str(exc)) from exc
            reports.append(report.to_dict())
        return {"reports": reports}

    @app.post("/exactness", response_model=schemas.ExactnessResponse)
    def exactness(req: schemas.ExactnessRequest):
        entry, a = _resolve(req.model, req.initial)
        try:
            result = analysis.exactness_check(
                entry.diffusion, a, req.n, req.n_paths, req.seed,
                horizon=req.horizon, model_name=req.model,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except analysis.PathFailureError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        payload = result.to_dict()
        payload["tolerance"] = req.tolerance
        payload["passed"] = result.max_relative_deviation <= req.tolerance
        return payload

    @app.post("/lemma1", response_model=schemas.Lemma1Response)
    def lemma1(req: schemas.Lemma1Request):
        entry, a = _resolve(req.model, req.initial)
        try:
            report = analysis.check_second_moment(
                entry.diffusion, a, req.n, req.n_paths, req.seed,
                horizon=req.horizon, model_name=req.model,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except analysis.PathFailureError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return report.to_dict()

    @app.post("/gap", response_model=schemas.GapResponse)
    def gap(req: schemas.GapRequest):
        entry, a = _resolve(req.model, req.initial)
        try:
            result = analysis.check_gap_rate(
                entry.diffusion, a, req.resolutions, req.n_paths, req.seed,
                horizon=req.horizon, model_name=req.model,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except analysis.PathFailureError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return result.to_dict()

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest):
        entry, _ = _resolve(req.model, None)
        try:
            failures = models.validate_model(entry.diffusion, req.probes)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "model": req.model,
            "probes": req.probes,
            "violations": [
                {
                    "invariant": f.invariant,
                    "location": f.location,
                    "observed": f.observed,
                    "allowed": f.allowed,
                }
                for f in failures
            ],
            "passed": not failures,
        }

    return app


app = create_app()
