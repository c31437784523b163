"""Read-only HTTP facade over the query engine for the what-if console.

Loads one model artifact, answers query and sweep requests, and exposes
model metadata. Stateless: identical (request, seed, artifact) gives an
identical response body. Seeds are always echoed back; the server assigns
one when the client omits it, so every clinical answer is reproducible.
"""

from __future__ import annotations

import hashlib
import secrets
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from . import queries as queries_mod
from .data import load_model
from .patient_model import AdmissionFeatures, TestTimeFeatures, layout_table
from .queries import QueryKind, QuerySpec
from .rng import make_rng
from .simulators import simulate_full

API_PREFIX = "/api/v1"
MAX_SWEEP_POINTS = 200


class AlphaModel(BaseModel):
    gender: int = Field(ge=0, le=1)
    age_years: float = Field(ge=0.0, le=120.0)
    admission_type: str
    from_healthcare_facility: int = Field(ge=0, le=1)
    cerebrovascular_history: int = Field(ge=0, le=1)
    diabetes: int = Field(ge=0, le=1)
    hospitalized_past_90d: int = Field(ge=0, le=1)
    mrsa_positive_past_90d: int = Field(ge=0, le=1)

    @field_validator("admission_type")
    @classmethod
    def _check_type(cls, v: str) -> str:
        allowed = {"emergency", "elective", "newborn", "other"}
        if v not in allowed:
            raise ValueError(f"admission_type must be one of {sorted(allowed)}")
        return v


class BetaModel(BaseModel):
    ab_days_30: int = Field(ge=0, le=30)
    icu_days_7: int = Field(ge=0, le=7)
    dialysis_7d: int = Field(ge=0, le=1)


class QueryRequest(BaseModel):
    kind: str
    alpha: AlphaModel
    beta1: BetaModel | None = None
    r1: int | None = Field(default=None, ge=0, le=1)
    tau_p: float | None = Field(default=None, ge=0.0)
    tau_m: float | None = Field(default=None, gt=0.0)
    n_sequences: int = Field(default=10000, ge=1, le=1_000_000)
    n_posterior_draws: int = Field(default=50, ge=1, le=10_000)
    seed: int | None = None

    @field_validator("kind")
    @classmethod
    def _check_kind(cls, v: str) -> str:
        if v not in {k.value for k in QueryKind}:
            raise ValueError(f"kind must be one of {sorted(k.value for k in QueryKind)}")
        return v


class SweepRequest(QueryRequest):
    axis: str
    grid: list[float]

    @field_validator("axis")
    @classmethod
    def _check_axis(cls, v: str) -> str:
        if v not in ("horizon", "delay"):
            raise ValueError("axis must be 'horizon' or 'delay'")
        return v

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("grid must be non-empty")
        if len(v) > MAX_SWEEP_POINTS:
            raise ValueError(f"grid too large: {len(v)} > {MAX_SWEEP_POINTS}")
        return v


def _to_query_spec(req: QueryRequest, seed: int) -> QuerySpec:
    alpha = AdmissionFeatures(**req.alpha.model_dump())
    beta1 = TestTimeFeatures(**req.beta1.model_dump()) if req.beta1 else None
    return QuerySpec(
        kind=req.kind,
        alpha=alpha,
        beta1=beta1,
        r1=req.r1,
        tau_p=req.tau_p,
        tau_m=req.tau_m,
        n_sequences=req.n_sequences,
        n_posterior_draws=req.n_posterior_draws,
        seed=seed,
    )


def create_app(artifact_path=None, registry=None) -> FastAPI:
    app = FastAPI(title="MRSA what-if query service", version="1")
    state = {"registry": registry, "artifact_hash": None}
    if artifact_path is not None:
        state["registry"] = load_model(artifact_path)
        state["artifact_hash"] = hashlib.sha256(
            open(artifact_path, "rb").read()
        ).hexdigest()
    elif registry is not None:
        state["artifact_hash"] = "in-memory"

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        errors = [
            {"field": ".".join(str(p) for p in e["loc"] if p != "body"), "message": e["msg"]}
            for e in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": errors})

    def _require_model():
        if state["registry"] is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        return None

    @app.post(API_PREFIX + "/query")
    def query(req: QueryRequest):
        unavailable = _require_model()
        if unavailable:
            return unavailable
        seed = req.seed if req.seed is not None else secrets.randbits(63)
        try:
            spec = _to_query_spec(req, seed)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        t0 = time.monotonic()
        result = queries_mod.estimate(spec, state["registry"])
        return {
            **result.to_dict(),
            "inputs": req.model_dump(exclude={"seed"}),
            "seed": seed,
            "artifact_version": state["artifact_hash"],
            "compute_seconds": time.monotonic() - t0,
        }

    @app.post(API_PREFIX + "/sweep")
    def sweep(req: SweepRequest):
        unavailable = _require_model()
        if unavailable:
            return unavailable
        seed = req.seed if req.seed is not None else secrets.randbits(63)
        t0 = time.monotonic()
        try:
            spec = _to_query_spec(req, seed)
            points = queries_mod.sweep(spec, state["registry"], req.axis, req.grid)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        return {
            "points": [{"grid": g, **r.to_dict()} for g, r in points],
            "inputs": req.model_dump(exclude={"seed"}),
            "seed": seed,
            "artifact_version": state["artifact_hash"],
            "compute_seconds": time.monotonic() - t0,
        }

    @app.get(API_PREFIX + "/model")
    def model():
        unavailable = _require_model()
        if unavailable:
            return unavailable
        reg = state["registry"]
        return {
            "artifact_version": state["artifact_hash"],
            "subprograms": [
                {
                    "name": name,
                    "family": fp.spec.family.value,
                    "input_dim": fp.spec.input_dim,
                    "censor_bound": fp.spec.censor_bound,
                }
                for name, fp in reg.items()
            ],
            "layout_table": layout_table(),
        }

    @app.get(API_PREFIX + "/health")
    def health():
        if state["registry"] is None:
            return {"status": "degraded", "reason": "model not loaded"}
        try:
            from .data import sample_alpha

            rng = make_rng(0)
            simulate_full(rng, state["registry"], sample_alpha(rng))
        except Exception as exc:  # degraded, with the reason surfaced
            return {"status": "degraded", "reason": str(exc)}
        return {"status": "ok"}

    @app.get(API_PREFIX + "/schema")
    def schema():
        return {
            "query_request": QueryRequest.model_json_schema(),
            "sweep_request": SweepRequest.model_json_schema(),
            "query_response_fields": [
                "estimate",
                "mc_stderr",
                "posterior_band",
                "n_effective",
                "inputs",
                "seed",
                "artifact_version",
                "compute_seconds",
            ],
        }

    return app
