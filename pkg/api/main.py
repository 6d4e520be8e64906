"""
FastAPI backend for MVKTrans.

Endpoints
---------
GET  /health
    Liveness check.
GET  /config
    Default training configuration.
POST /synthesize
    Write a synthetic dataset and return its summary.
POST /train
    Pretrain, fine-tune and evaluate on a dataset directory.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.config import configure_logging, load_train_config
from app.data import load_dataset, synthesize_dataset, write_dataset
from app.errors import ConfigError, DataError, NumericalError
from app.pipeline import run_experiment
from app.schemas import (
    DatasetSummary,
    SynthesizeRequest,
    TrainConfig,
    TrainRequest,
    TrainResponse,
)

configure_logging()
logger = logging.getLogger(__name__)

app = FastAPI(
    title="MVKTrans API",
    description=(
        "Multi-omics classification with graph contrastive pretraining "
        "and cross-omics distillation."
    ),
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)


# ---------------------------------------------------------------------------
# Error mapping
# ---------------------------------------------------------------------------
@app.exception_handler(ConfigError)
@app.exception_handler(DataError)
async def _client_error(request: Request, exc: Exception) -> JSONResponse:
    """Data and config errors become HTTP 422."""
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(NumericalError)
async def _numerical_error(request: Request, exc: NumericalError) -> JSONResponse:
    """Numerical failures become HTTP 500."""
    logger.error("Numerical failure on %s: %s", request.url.path, exc)
    return JSONResponse(status_code=500, content={"detail": str(exc)})


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------
@app.get("/health")
def health() -> dict[str, str]:
    """Liveness check."""
    return {"status": "ok"}


@app.get("/config", response_model=TrainConfig)
def default_config() -> TrainConfig:
    """Default training configuration."""
    return TrainConfig()


@app.post("/synthesize", response_model=DatasetSummary)
def synthesize(request: SynthesizeRequest) -> DatasetSummary:
    """Generate a synthetic dataset and write it in the canonical layout."""
    dataset = synthesize_dataset(
        request.n,
        request.dims,
        request.n_classes,
        request.informativeness,
        seed=request.seed,
        name=request.name,
    )
    directory = write_dataset(dataset, request.directory)
    return DatasetSummary(
        name=dataset.name,
        directory=str(directory),
        n_samples=dataset.n,
        omics=dataset.omics_names,
        dims=[m.d for m in dataset.omics],
        classes=list(dataset.labels.class_names),
    )


@app.post("/train", response_model=TrainResponse)
def train(request: TrainRequest) -> TrainResponse:
    """Run one experiment and return its metrics and training trace."""
    overrides = dict(request.overrides)
    if request.seed is not None:
        overrides["seed"] = request.seed
    config = load_train_config(None, **overrides)
    dataset = load_dataset(request.data_dir)
    record = run_experiment(dataset, config, request.switches).record
    return TrainResponse(
        arm=record.switches.label,
        seed=record.seed,
        metrics=record.metrics,
        epoch_losses=record.epoch_losses,
        pipeline_log=record.pipeline_log,
        wall_time_s=record.wall_time_s,
    )
