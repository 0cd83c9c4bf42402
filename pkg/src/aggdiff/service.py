"""HTTP facade over the experiment drivers: one POST endpoint per run
kind, each taking the same JSON document the CLI reads from disk."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__, runs
from .flow import CflViolation, NumericalFailure
from .grids import SupportOverflowError
from .schemas import RunConfig

app = FastAPI(
    title="aggdiff",
    version=__version__,
    description="free-energy evaluation, regime classification, dilation probes, "
    "and descent minimization for radial aggregation-diffusion models",
)


class EnergyResponse(BaseModel):
    S: float
    W: float
    F: float
    mass: float


class ClassifyResponse(BaseModel):
    regime: str
    m_star: float
    chi: float | None  # None encodes an infinite value
    k_l1: float | None
    subcritical_ok: bool
    m_c: float | None
    delta_used: float
    c0_used: float
    notes: list[str]


class ProbeResponse(BaseModel):
    rows: list[tuple[float, float]]
    negative_found: bool
    fitted_exponent: float | None
    skipped: list[float]


class RunSummary(BaseModel):
    width: float
    outcome: str
    final_F: float
    residual: float
    steps: int
    sup: float


class MinimizeResponse(BaseModel):
    runs: list[RunSummary]
    best_width: float
    best_outcome: str
    estimate: float


class SweepRow(BaseModel):
    value: float
    outcome: str
    i_m: float
    sup: float


class SweepResponse(BaseModel):
    parameter: str
    rows: list[SweepRow]


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (NumericalFailure, CflViolation, FloatingPointError) as exc:
        raise HTTPException(status_code=500, detail=f"numerical failure: {exc}")
    except (SupportOverflowError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/energy", response_model=EnergyResponse)
def energy(cfg: RunConfig):
    return _guard(runs.run_energy, cfg)


@app.post("/classify", response_model=ClassifyResponse)
def classify(cfg: RunConfig):
    return _guard(runs.run_classify, cfg)


@app.post("/probe", response_model=ProbeResponse)
def probe(cfg: RunConfig):
    return _guard(runs.run_probe, cfg)


@app.post("/minimize", response_model=MinimizeResponse)
def minimize(cfg: RunConfig):
    return _guard(runs.run_minimize, cfg)


@app.post("/sweep", response_model=SweepResponse)
def sweep(cfg: RunConfig):
    return _guard(runs.run_sweep, cfg)
