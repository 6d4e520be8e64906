"""
Pydantic models for the MVKTrans pipeline.

Defines the data contracts shared between the training pipeline, the
command-line interface, the API layer and the result files.

Classes
-------
Task
    Binary or multiclass classification.
CheckpointKind
    Provenance of encoder weights (pretrained vs. random).
AblationMetric
    Metric used to score feature ablation.
TrainConfig
    Every hyperparameter of a run (paper defaults).
GraphConfig / AugmentationConfig / LossWeights
    Per-module views of ``TrainConfig``.
AblationSwitches
    Which components and omics are active.
PerturbationSpec
    Missing-feature corruption for robustness runs.
MetricsReport
    Evaluation metrics of one run.
EpochLoss / PipelineStep / RunRecord
    Training trace and replayable run record.
SweepRow / AblationArmSummary / BiomarkerEntry
    Rows of harness result tables.
"""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------
class Task(str, Enum):
    """Classification task type."""

    BINARY = "binary"
    MULTICLASS = "multiclass"


class CheckpointKind(str, Enum):
    """Provenance of stored encoder weights."""

    PRETRAINED = "pretrained"
    RANDOM = "random"
    MODEL = "model"


class AblationMetric(str, Enum):
    """Metric whose degradation scores a feature."""

    LOG_LOSS = "log_loss"
    ACCURACY = "accuracy"
    F1_MACRO = "f1_macro"
    AUC = "auc"


class PipelineStatus(str, Enum):
    """Outcome of a pipeline step."""

    DONE = "done"
    SKIPPED = "skipped"
    ERROR = "error"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
class GraphConfig(BaseModel):
    """Sample-graph construction settings."""

    threshold: float = Field(0.05, ge=-1.0, le=1.0, description="delta")


class AugmentationConfig(BaseModel):
    """Feature-masking settings for the two contrastive views."""

    p1: float = Field(0.3, ge=0.0, le=1.0)
    p2: float = Field(0.2, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)


class LossWeights(BaseModel):
    """Coefficients of the total objective."""

    lambda1: float = Field(1.0, ge=0.0)
    lambda2: float = Field(0.005, ge=0.0)


class TrainConfig(BaseModel):
    """Every hyperparameter of a run; defaults are the published values."""

    model_config = ConfigDict(extra="forbid")

    # graph / augmentation / contrastive
    delta: float = Field(0.05, ge=-1.0, le=1.0)
    p1: float = Field(0.3, ge=0.0, le=1.0)
    p2: float = Field(0.2, ge=0.0, le=1.0)
    tau: float = Field(0.5, gt=0.0)

    # objective
    lambda1: float = Field(1.0, ge=0.0)
    lambda2: float = Field(0.005, ge=0.0)

    # optimisation
    pretrain_epochs: int = Field(2000, ge=0)
    pretrain_lr: float = Field(1e-3, gt=0.0)
    finetune_epochs: int = Field(5000, ge=0)
    gat_lr: float = Field(5e-3, gt=0.0)
    inter_lr: float = Field(3e-3, gt=0.0)

    # architecture
    gat_layers: int = Field(2, ge=1)
    gat_heads: int = Field(4, ge=1)
    gat_head_width: int = Field(64, ge=1)
    gat_slope: float = Field(0.2, gt=0.0, lt=1.0)
    proj_dim: int = Field(128, ge=1)
    d_attn: int = Field(64, ge=1)
    d_e: int = Field(16, ge=1)
    head_hidden: int = Field(64, ge=1)

    # experiment protocol
    seed: int = Field(0, ge=0)
    n_runs: int = Field(5, ge=1)
    test_fraction: float = Field(0.3, gt=0.0, lt=1.0)
    deterministic: bool = True
    inductive: bool = False
    symmetric_cd_grad: bool = False
    missing_rates: list[float] = Field(
        default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8]
    )
    ablation_metric: AblationMetric = AblationMetric.LOG_LOSS
    biomarker_top_k: int = Field(30, ge=1)
    log_every: int = Field(100, ge=1)

    @field_validator("missing_rates", mode="before")
    @classmethod
    def _split_rates(cls, value: object) -> object:
        if isinstance(value, str):
            return [float(v) for v in value.split(",") if v.strip()]
        return value

    @field_validator("missing_rates")
    @classmethod
    def _check_rates(cls, value: list[float]) -> list[float]:
        if any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("missing rates must lie in [0, 1]")
        return value

    # -- per-module views ------------------------------------------------
    @property
    def graph(self) -> GraphConfig:
        return GraphConfig(threshold=self.delta)

    def augmentation(self, seed: int) -> AugmentationConfig:
        return AugmentationConfig(p1=self.p1, p2=self.p2, seed=seed)

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(lambda1=self.lambda1, lambda2=self.lambda2)

    def fingerprint(self) -> bytes:
        """SHA-256 of the canonical JSON dump (32 bytes)."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).digest()


class AblationSwitches(BaseModel):
    """Component toggles and omics subset of one run."""

    use_gcl: bool = True
    use_cd: bool = True
    omics: Optional[list[str]] = Field(
        None, description="Omics names to keep; None keeps all"
    )

    @field_validator("omics")
    @classmethod
    def _non_empty(cls, value: Optional[list[str]]) -> Optional[list[str]]:
        if value is not None and len(value) == 0:
            raise ValueError("at least one omics must be selected")
        return value

    @property
    def label(self) -> str:
        """Arm name used in tables, e.g. ``full`` or ``no-cd[omics1+omics2]``."""
        if self.use_gcl and self.use_cd:
            arm = "full"
        elif self.use_cd:
            arm = "no-gcl"
        elif self.use_gcl:
            arm = "no-cd"
        else:
            arm = "baseline"
        if self.omics:
            arm += "[" + "+".join(self.omics) + "]"
        return arm


class PerturbationSpec(BaseModel):
    """Missing-feature corruption of selected rows."""

    rate: float = Field(..., ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)
    rows: Optional[list[int]] = Field(
        None, description="Target rows (test samples); None = all rows"
    )


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------
class MetricsReport(BaseModel):
    """Evaluation metrics of one run."""

    task: Task
    n_samples: int = Field(..., ge=0)
    accuracy: float = Field(..., ge=0.0, le=1.0)
    f1: Optional[float] = Field(None, ge=0.0, le=1.0, description="binary F1")
    f1_weighted: float = Field(..., ge=0.0, le=1.0)
    f1_macro: float = Field(..., ge=0.0, le=1.0)
    auc: Optional[float] = Field(None, ge=0.0, le=1.0, description="binary AUC")
    confusion: list[list[int]]


class EpochLoss(BaseModel):
    """Loss components recorded for one fine-tune epoch."""

    epoch: int
    total: float
    auxiliary: float
    distillation: float
    final: float


class PipelineStep(BaseModel):
    """One step in the pipeline log."""

    step: str
    status: PipelineStatus
    detail: str
    duration_ms: int = 0


class RunRecord(BaseModel):
    """Replayable record of one fine-tune run."""

    config: TrainConfig
    switches: AblationSwitches
    seed: int
    dataset: str
    omics: list[str]
    train_indices: list[int]
    test_indices: list[int]
    pretrain_losses: dict[str, list[float]] = Field(default_factory=dict)
    epoch_losses: list[EpochLoss] = Field(default_factory=list)
    metrics: MetricsReport
    pipeline_log: list[PipelineStep] = Field(default_factory=list)
    wall_time_s: float = 0.0


class SweepRow(BaseModel):
    """One (arm, seed, rate) evaluation of a harness."""

    arm: str
    seed: int
    rate: float = 0.0
    metrics: MetricsReport


class AblationArmSummary(BaseModel):
    """Aggregate of one ablation arm over seeds."""

    arm: str
    n_runs: int
    accuracy_mean: float
    accuracy_std: float
    f1_mean: float
    f1_std: float
    auc_mean: Optional[float] = None
    effect_vs_full: Optional[float] = Field(
        None, description="mean ACC difference full - arm"
    )
    cohens_d: Optional[float] = None


class BiomarkerEntry(BaseModel):
    """One ranked feature of the feature-ablation study."""

    rank: int = Field(..., ge=1)
    omics: str
    feature: str
    score: float


# ---------------------------------------------------------------------------
# API payloads
# ---------------------------------------------------------------------------
class SynthesizeRequest(BaseModel):
    """Parameters of a synthetic dataset written by the service."""

    directory: str = Field(..., description="Target dataset directory")
    n: int = Field(200, ge=2)
    dims: list[int] = Field(default_factory=lambda: [200, 200, 200], min_length=2)
    n_classes: int = Field(2, ge=2)
    informativeness: list[float] = Field(default_factory=lambda: [0.3, 0.2, 0.1])
    seed: int = Field(0, ge=0)
    name: str = "synthetic"


class DatasetSummary(BaseModel):
    name: str
    directory: str
    n_samples: int
    omics: list[str]
    dims: list[int]
    classes: list[str]


class TrainRequest(BaseModel):
    """One pretrain + fine-tune run on a dataset directory."""

    data_dir: str
    seed: Optional[int] = Field(None, ge=0)
    overrides: dict[str, object] = Field(
        default_factory=dict, description="TrainConfig fields to override"
    )
    switches: AblationSwitches = Field(default_factory=AblationSwitches)


class TrainResponse(BaseModel):
    arm: str
    seed: int
    metrics: MetricsReport
    epoch_losses: list[EpochLoss]
    pipeline_log: list[PipelineStep]
    wall_time_s: float
