# hierstein/routes/experiments.py
from __future__ import annotations

import logging
import math
from typing import Literal, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel

from hierstein.errors import CapExceededError, HierSteinError, UnsupportedPerturbationError
from hierstein.features import bounds, experiment
from hierstein.laws import to_record

router = APIRouter(prefix="/experiments", tags=["experiments"])
log = logging.getLogger("hierstein.routes")


class ZeroBiasRequest(BaseModel):
    config: experiment.ExperimentConfig
    level: int
    effect: Literal["x", "y", "z"] = "z"


class RunRequest(BaseModel):
    config: experiment.ExperimentConfig
    threads: Optional[int] = None


def _finite(v: float) -> Optional[float]:
    # JSON has no NaN
    return v if math.isfinite(v) else None


def _http_error(e: HierSteinError) -> HTTPException:
    status = 413 if isinstance(e, CapExceededError) else 422
    return HTTPException(status_code=status, detail=str(e))


@router.get("/health")
def health():
    return {"ok": True}


@router.post("/validate")
def validate(cfg: experiment.ExperimentConfig):
    try:
        tm = experiment.build_models(cfg)
    except HierSteinError as e:
        raise _http_error(e) from None
    return {
        "ok": True,
        "n_max": cfg.n_max,
        "method": cfg.method,
        "exact_moments": tm.is_exact,
        "lambda_limit": {"x": tm.model_x.lambda_limit, "y": tm.model_y.lambda_limit},
    }


@router.post("/bounds")
def rate_bounds(cfg: experiment.ExperimentConfig):
    try:
        tm = experiment.build_models(cfg)
        if not tm.is_exact:
            raise UnsupportedPerturbationError("bounds need exact perturbation moments")
        horizon = max(cfg.n_max, 3)
        report = bounds.rate_report(
            bounds.fit_model_constants(tm.model_x, horizon),
            bounds.fit_model_constants(tm.model_y, horizon),
            tm, horizon,
        )
    except HierSteinError as e:
        raise _http_error(e) from None
    return {
        "report": report.as_dict(),
        "hypotheses_met": report.hypotheses_met,
        "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail, "warn": c.warn}
                   for c in report.checks()],
    }


@router.post("/zerobias")
def zerobias(req: ZeroBiasRequest):
    try:
        law = experiment.zero_bias_of_level(req.config, req.level, req.effect)
    except HierSteinError as e:
        raise _http_error(e) from None
    return {"level": req.level, "effect": req.effect, "record": to_record(law)}


@router.post("/run")
def run(req: RunRequest):
    try:
        curve = experiment.run_experiment(req.config, threads=req.threads)
    except HierSteinError as e:
        raise _http_error(e) from None
    return {
        "rows": [
            {"n": r.n, "method": r.method, "d_n": _finite(r.d_n), "stderr": _finite(r.stderr),
             "beta_n": _finite(r.beta_n), "r_x": _finite(r.r_x), "r_y": _finite(r.r_y),
             "gap_flag": r.gap_flag}
            for r in curve.rows
        ],
        "gamma_fit": _finite(curve.gamma_fit),
        "c_fit": _finite(curve.c_fit),
        "gamma_total": _finite(curve.gamma_total),
        "verdict": curve.verdict,
        "notes": curve.notes,
    }
