"""HTTP facade over the laboratory.

The FastAPI app wraps the core package with typed request/response models:
spectral evaluations answer synchronously, experiments run to completion in
the request (they are batch jobs; clients set generous timeouts), and the
verification matrix is exposed for both profiles.  The CLI uses the same
request models and calls either this service or the local functions.
"""

from __future__ import annotations

import math
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .spectral import (SpectralModel, Kind, phi, phi_tilde, tau, tau_star,
                       tau_alpha, kpz_solve, kpz_dual, q_beta, SpectralError)
from .config import ExperimentConfig, ConfigError, EXPERIMENTS
from .experiments import run_experiment, verify_all
from .reports import fingerprint


class ModelSpec(BaseModel):
    kind: str = "gaussian-critical"
    mean: Optional[float] = None
    variance: Optional[float] = None

    def build(self) -> SpectralModel:
        try:
            k = Kind(self.kind)
        except ValueError:
            raise HTTPException(422, f"unknown model kind {self.kind!r}")
        if k == Kind.GAUSSIAN_CRITICAL:
            return SpectralModel.gaussian_critical()
        if k == Kind.GAUSSIAN_SHIFTED:
            if self.mean is None or self.variance is None:
                raise HTTPException(422, "gaussian-shifted needs mean and variance")
            return SpectralModel.gaussian(self.mean, self.variance)
        if self.mean is None:
            raise HTTPException(422, "degenerate needs mean (the constant)")
        return SpectralModel.degenerate(self.mean)


class SpectralRequest(BaseModel):
    model: ModelSpec = Field(default_factory=ModelSpec)
    s_values: list[float] = Field(default_factory=list)
    gamma_values: list[float] = Field(default_factory=list)
    zeta0_values: list[float] = Field(default_factory=list)
    alpha: Optional[float] = None
    beta: Optional[float] = None


class LegendrePointModel(BaseModel):
    gamma: float
    value: float
    argmin_t: float


class SpectralResponse(BaseModel):
    phi: list[float]
    phi_tilde: list[float]
    tau: list[float]
    tau_alpha: Optional[list[float]] = None
    tau_star: list[LegendrePointModel]
    kpz: list[float]
    kpz_dual: Optional[list[float]] = None
    q_beta: Optional[float] = None


class ExperimentRequest(BaseModel):
    experiment: str
    seed: int = 20260810
    beta: float = 1.0
    alpha: float = 0.5
    n_list: list[int] = Field(default_factory=lambda: [18])
    replicas: int = 1000
    iterations: int = 60
    dx: float = 0.02
    gamma: float = 0.4
    theta: float = 1.0
    depth_lo: int = 8
    depth_hi: int = 18
    q_grid: Optional[list[float]] = None
    wave_alpha: str = "0.5"
    output_dir: Optional[str] = None
    threads: Optional[int] = None

    def build(self) -> ExperimentConfig:
        kwargs = self.model_dump()
        if kwargs.get("q_grid") is None:
            kwargs.pop("q_grid")
        try:
            return ExperimentConfig(**kwargs)
        except ConfigError as exc:
            raise HTTPException(422, str(exc))


class ExperimentReportModel(BaseModel):
    schema_version: int
    experiment: str
    config: dict
    results: dict
    checks: dict[str, bool]
    audit: dict
    passed: bool
    fingerprint: str


class VerifyRequest(BaseModel):
    profile: str = "quick"
    seed: int = 20260810
    threads: Optional[int] = None
    only: Optional[list[str]] = None


class CriterionModel(BaseModel):
    cid: str
    description: str
    passed: bool
    details: dict


class VerifyResponse(BaseModel):
    profile: str
    all_passed: bool
    wall_clock_s: float
    criteria: list[CriterionModel]
    matrix: str


def create_app() -> FastAPI:
    app = FastAPI(title="cascadelab", version=__version__)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__,
                "experiments": list(EXPERIMENTS)}

    @app.post("/spectral/evaluate", response_model=SpectralResponse)
    def spectral_evaluate(req: SpectralRequest):
        model = req.model.build()
        try:
            resp = SpectralResponse(
                phi=[phi(model, s) for s in req.s_values],
                phi_tilde=[phi_tilde(model, s) for s in req.s_values],
                tau=[tau(model, s) for s in req.s_values],
                tau_star=[LegendrePointModel(gamma=g, value=tau_star(model, g).value,
                                             argmin_t=tau_star(model, g).argmin_t)
                          for g in req.gamma_values],
                kpz=[kpz_solve(model, z) for z in req.zeta0_values],
            )
            if req.alpha is not None:
                resp.tau_alpha = [tau_alpha(model, req.alpha, s) for s in req.s_values]
                resp.kpz_dual = [kpz_dual(model, z, req.alpha) for z in req.zeta0_values]
            if req.beta is not None:
                resp.q_beta = q_beta(model, req.beta)
        except SpectralError as exc:
            raise HTTPException(422, str(exc))
        return resp

    @app.post("/experiments/run", response_model=ExperimentReportModel)
    def experiments_run(req: ExperimentRequest):
        cfg = req.build()
        try:
            cfg.check_resources()
        except ConfigError as exc:
            raise HTTPException(422, str(exc))
        report = run_experiment(cfg)
        return ExperimentReportModel(
            schema_version=report.schema_version,
            experiment=report.experiment,
            config=report.config,
            results=_jsonable(report.results),
            checks=report.checks,
            audit=report.audit,
            passed=report.passed,
            fingerprint=fingerprint(report),
        )

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest):
        if req.profile not in ("quick", "full"):
            raise HTTPException(422, "profile must be 'quick' or 'full'")
        summary = verify_all(req.profile, req.seed, req.threads, req.only)
        return VerifyResponse(
            profile=summary.profile,
            all_passed=summary.all_passed,
            wall_clock_s=summary.wall_clock_s,
            criteria=[CriterionModel(cid=r.cid, description=r.description,
                                     passed=r.passed, details=_jsonable(r.details))
                      for r in summary.results],
            matrix=summary.matrix(),
        )

    return app


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


app = create_app()
