"""
Result files of the pipeline.

Output directory layout::

    out/checkpoints/pretrain_<omics>.ckpt   encoder weights per omics
    out/checkpoints/model.ckpt              full fine-tuned model
    out/metrics.json                        metrics + config echo + seed
    out/run_record.json                     full replayable record (with timings)
    out/sweeps/*.csv                        harness tables
    out/biomarkers_<omics>.csv              ranked feature-ablation scores
    out/edges.csv                           mean distillation strength per omics pair
    out/graph_<omics>.csv                   sample-graph edge matrices

``metrics.json`` carries no timing, so reruns with the same config, seed and
data write identical bytes.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from app.checkpoint import read_checkpoint, write_checkpoint
from app.data import Dataset
from app.errors import CheckpointError
from app.graph import write_graph_csv
from app.model import build_model
from app.pipeline import (
    AblationResult,
    BiomarkerReport,
    GridPoint,
    RobustnessResult,
    TrainedModel,
    prepare_run,
)
from app.schemas import CheckpointKind, MetricsReport, RunRecord

logger = logging.getLogger(__name__)

MODEL_CHECKPOINT = "model.ckpt"


def checkpoint_dir(out_dir: str | Path) -> Path:
    """``<out>/checkpoints``."""
    return Path(out_dir) / "checkpoints"


def _metric_columns(metrics: MetricsReport) -> dict[str, object]:
    """Flatten a metrics report into CSV columns."""
    row = metrics.model_dump(mode="json", exclude={"confusion"})
    row["n_test"] = row.pop("n_samples")
    return row


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write *frame* to *path*, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.6f")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------
def write_metrics(record: RunRecord, out_dir: str | Path) -> Path:
    """Write ``metrics.json`` (no timings)."""
    path = Path(out_dir) / "metrics.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "dataset": record.dataset,
        "seed": record.seed,
        "arm": record.switches.label,
        "omics": record.omics,
        "config": record.config.model_dump(mode="json"),
        "metrics": record.metrics.model_dump(mode="json"),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_run_record(record: RunRecord, out_dir: str | Path) -> Path:
    """Write the full ``run_record.json``."""
    path = Path(out_dir) / "run_record.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_run_record(out_dir: str | Path) -> RunRecord:
    """Read ``run_record.json`` from *out_dir*."""
    path = Path(out_dir) / "run_record.json"
    if not path.is_file():
        raise CheckpointError(f"Run record not found: {path}")
    return RunRecord.model_validate_json(path.read_text(encoding="utf-8"))


def save_model(trained: TrainedModel, out_dir: str | Path) -> Path:
    """Write the fine-tuned model to ``checkpoints/model.ckpt``."""
    return write_checkpoint(
        checkpoint_dir(out_dir) / MODEL_CHECKPOINT,
        trained.model.state(),
        trained.prepared.config.fingerprint(),
        CheckpointKind.MODEL,
    )


def load_model(dataset: Dataset, record: RunRecord, out_dir: str | Path) -> TrainedModel:
    """Rebuild the run described by *record* and load its fine-tuned weights."""
    ckpt = read_checkpoint(checkpoint_dir(out_dir) / MODEL_CHECKPOINT)
    if ckpt.kind is not CheckpointKind.MODEL:
        raise CheckpointError(f"expected a model checkpoint, found {ckpt.kind.value!r}.")
    if ckpt.config_hash != record.config.fingerprint():
        raise CheckpointError("checkpoint was written under a different training config.")
    prepared = prepare_run(dataset, record.config, record.switches, record.seed)
    if prepared.dataset.omics_names != record.omics:
        raise CheckpointError(
            f"dataset omics {prepared.dataset.omics_names} do not match the run's {record.omics}."
        )
    model = build_model(
        [m.d for m in prepared.dataset.omics],
        prepared.dataset.omics_names,
        prepared.dataset.labels.n_classes,
        record.config,
        use_cd=record.switches.use_cd,
        seed=record.seed,
    )
    model.load_state(ckpt.state)
    return TrainedModel(prepared, model, record.switches)


def write_graphs(trained: TrainedModel, out_dir: str | Path) -> list[Path]:
    """Write ``graph_<omics>.csv`` per omics."""
    paths = []
    data = trained.dataset
    for matrix, graph in zip(data.omics, trained.prepared.graphs):
        path = Path(out_dir) / f"graph_{matrix.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_graph_csv(graph, list(matrix.sample_ids), path)
        paths.append(path)
    return paths


def write_edges(strengths: Iterable[tuple[str, str, float]], out_dir: str | Path) -> Path:
    """Write ``edges.csv`` with the mean strength per ordered pair."""
    frame = pd.DataFrame(list(strengths), columns=["source", "target", "mean_strength"])
    return _write_csv(frame, Path(out_dir) / "edges.csv")


# ---------------------------------------------------------------------------
# Harness tables
# ---------------------------------------------------------------------------
def write_robustness(result: RobustnessResult, out_dir: str | Path) -> list[Path]:
    """Write per-run rows and per-rate summaries of a sweep."""
    sweeps = Path(out_dir) / "sweeps"
    rows = pd.DataFrame(
        [{"arm": r.arm, "seed": r.seed, "rate": r.rate, **_metric_columns(r.metrics)} for r in result.rows]
    )
    summary = pd.DataFrame(
        [
            {
                "rate": s.rate,
                "n_runs": s.n_runs,
                **{f"{k}_mean": v for k, v in s.mean.items()},
                **{f"{k}_std": v for k, v in s.std.items()},
                **{f"{k}_ci95": v for k, v in s.ci95.items()},
            }
            for s in result.summary
        ]
    )
    return [
        _write_csv(rows, sweeps / "robustness.csv"),
        _write_csv(summary, sweeps / "robustness_summary.csv"),
    ]


def write_ablation(result: AblationResult, out_dir: str | Path) -> list[Path]:
    """Write per-run rows and per-arm summaries of an ablation."""
    sweeps = Path(out_dir) / "sweeps"
    rows = pd.DataFrame(
        [{"arm": r.arm, "seed": r.seed, **_metric_columns(r.metrics)} for r in result.rows]
    )
    summary = pd.DataFrame([s.model_dump() for s in result.summary])
    return [
        _write_csv(rows, sweeps / "ablation.csv"),
        _write_csv(summary, sweeps / "ablation_summary.csv"),
    ]


def write_grid(points: Sequence[GridPoint], out_dir: str | Path) -> Path:
    """Write the masking grid-search table."""
    frame = pd.DataFrame(
        [{"p1": p.p1, "p2": p.p2, **_metric_columns(p.metrics)} for p in points]
    )
    return _write_csv(frame, Path(out_dir) / "sweeps" / "gridsearch.csv")


def write_biomarkers(report: BiomarkerReport, out_dir: str | Path) -> list[Path]:
    """Write the top-k list per omics and the full score table."""
    paths = []
    for omics, entries in report.ranked.items():
        frame = pd.DataFrame([e.model_dump() for e in entries], columns=["rank", "omics", "feature", "score"])
        paths.append(_write_csv(frame, Path(out_dir) / f"biomarkers_{omics}.csv"))
    scores = pd.DataFrame(
        [
            {"omics": omics, "feature": feature, "score": score}
            for omics, pairs in report.scores.items()
            for feature, score in pairs
        ]
    )
    paths.append(_write_csv(scores, Path(out_dir) / "sweeps" / "feature_ablation.csv"))
    return paths
