"""
Pipeline orchestrator.

Ties together data preparation, graph construction, contrastive
pretraining, fine-tuning and evaluation, with step-by-step timing, and
runs the experiment harnesses built on them.

Public API
----------
prepare_run(dataset, config, switches, seed) -> PreparedRun
run_pretrain(dataset, config, switches, seed, prepared) -> dict[str, PretrainedWeights]
run_finetune(dataset, pretrained, config, switches, seed) -> RunResult
run_experiment(dataset, config, switches, seed) -> RunResult
rebuild_graphs(prepared, matrices) -> list[SampleGraph]
predict_proba(trained, matrices) -> NDArray
evaluate(trained, matrices) -> MetricsReport
missing_test_features(trained, rate, seed) -> list[OmicsMatrix]
evaluate_missing(trained, rate, seed) -> MetricsReport
check_ablation_metric(metric, task)
robustness_sweep(dataset, config, rates, seeds, switches) -> RobustnessResult
feature_ablation_rank(trained, top_k, metric) -> BiomarkerReport
run_ablation(dataset, config, seeds, combinations) -> AblationResult
grid_search_masking(dataset, config, values, seed) -> list[GridPoint]
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TypeVar

import numpy as np
from numpy.typing import NDArray
from sklearn.metrics import log_loss

from app.checkpoint import write_checkpoint
from app.data import Dataset, OmicsMatrix, SplitPlan, apply_missing, standardize_dataset, stratified_split
from app.distillation import mean_edge_strengths
from app.errors import ConfigError, NonFiniteLossError
from app.gat import init_encoder
from app.graph import SampleGraph, build_graph, build_inductive_graph
from app.heads import final_logits
from app.metrics import compute_metrics
from app.model import ModelParams, build_model, compute_loss, forward
from app.params import MlpParams, component_rng
from app.pretrain import PretrainedWeights, pretrain
from app.schemas import (
    AblationArmSummary,
    AblationMetric,
    AblationSwitches,
    BiomarkerEntry,
    CheckpointKind,
    EpochLoss,
    MetricsReport,
    PerturbationSpec,
    PipelineStatus,
    PipelineStep,
    RunRecord,
    SweepRow,
    Task,
    TrainConfig,
)
from app.tensor import Adam, GradientTape, Tensor, row_softmax

logger = logging.getLogger(__name__)

T = TypeVar("T")


# ---------------------------------------------------------------------------
# Timing helper
# ---------------------------------------------------------------------------
def _timed(fn: Callable[..., T], *args, **kwargs) -> tuple[T, int]:
    """Run *fn* and return ``(result, elapsed_ms)``."""
    t0 = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, int((time.perf_counter() - t0) * 1000)


def derived_seed(seed: int, *keys: object) -> int:
    """Stable 31-bit seed for a named sub-stream."""
    return int(component_rng(seed, *keys).integers(2**31 - 1))


# ---------------------------------------------------------------------------
# Run containers
# ---------------------------------------------------------------------------
@dataclass
class PreparedRun:
    """Standardised data, split and graphs of one (dataset, seed, omics subset)."""

    dataset: Dataset
    split: SplitPlan
    graphs: list[SampleGraph]
    config: TrainConfig
    seed: int

    @property
    def key_rows(self) -> NDArray[np.int64] | None:
        return self.split.train if self.config.inductive else None

    @property
    def features(self) -> list[Tensor]:
        return [Tensor(m.values) for m in self.dataset.omics]

    @property
    def train_labels(self) -> NDArray[np.int64]:
        """Labels with every test position blanked to -1."""
        masked = np.full(self.dataset.n, -1, dtype=np.int64)
        masked[self.split.train] = self.dataset.labels.classes[self.split.train]
        return masked


@dataclass
class TrainedModel:
    prepared: PreparedRun
    model: ModelParams
    switches: AblationSwitches

    @property
    def dataset(self) -> Dataset:
        return self.prepared.dataset


@dataclass
class RunResult:
    record: RunRecord
    trained: TrainedModel


# ---------------------------------------------------------------------------
# Preparation
# ---------------------------------------------------------------------------
def prepare_run(
    dataset: Dataset,
    config: TrainConfig,
    switches: AblationSwitches | None = None,
    seed: int | None = None,
) -> PreparedRun:
    """Split (on the full label set), select omics, standardise, build graphs."""
    seed = config.seed if seed is None else seed
    switches = switches or AblationSwitches()
    split = stratified_split(dataset.labels, config.test_fraction, seed)
    selected = standardize_dataset(dataset.select(switches.omics), split.train)
    if config.inductive:
        graphs = [build_inductive_graph(m, split.train, config.graph) for m in selected.omics]
    else:
        graphs = [build_graph(m, config.graph) for m in selected.omics]
    return PreparedRun(selected, split, graphs, config, seed)


# ---------------------------------------------------------------------------
# Pretraining
# ---------------------------------------------------------------------------
def run_pretrain(
    dataset: Dataset,
    config: TrainConfig,
    switches: AblationSwitches | None = None,
    seed: int | None = None,
    prepared: PreparedRun | None = None,
    checkpoint_dir: str | Path | None = None,
) -> dict[str, PretrainedWeights]:
    """One encoder per omics; random initialisations when GCL is switched off.

    With *checkpoint_dir* every encoder is also written to
    ``pretrain_<omics>.ckpt`` there.
    """
    switches = switches or AblationSwitches()
    prepared = prepared or prepare_run(dataset, config, switches, seed)
    weights = _pretrain_all(prepared, switches)
    if checkpoint_dir is not None:
        for name, w in weights.items():
            write_checkpoint(
                Path(checkpoint_dir) / f"pretrain_{name}.ckpt",
                {k: t.data for k, t in w.encoder.named(f"gat.{name}").items()},
                config.fingerprint(),
                w.kind,
            )
    return weights


def _pretrain_all(
    prepared: PreparedRun,
    switches: AblationSwitches,
) -> dict[str, PretrainedWeights]:
    """Pretrained (or random) encoder per prepared omics."""
    config = prepared.config
    seed = prepared.seed
    weights: dict[str, PretrainedWeights] = {}
    for matrix, graph, x in zip(prepared.dataset.omics, prepared.graphs, prepared.features):
        encoder = init_encoder(
            component_rng(seed, "gat", matrix.name),
            matrix.d,
            config.gat_layers,
            config.gat_heads,
            config.gat_head_width,
            config.gat_slope,
        )
        if not switches.use_gcl:
            weights[matrix.name] = PretrainedWeights(
                omics=matrix.name, encoder=encoder, kind=CheckpointKind.RANDOM
            )
            continue
        head = MlpParams.create(
            component_rng(seed, "proj", matrix.name),
            [encoder.d_out, config.proj_dim, config.proj_dim],
        )
        weights[matrix.name] = pretrain(
            graph,
            x,
            encoder,
            head,
            config.augmentation(derived_seed(seed, "mask", matrix.name)),
            epochs=config.pretrain_epochs,
            lr=config.pretrain_lr,
            tau=config.tau,
            rows=prepared.key_rows,
            omics=matrix.name,
            log_every=config.log_every,
        )
    return weights


# ---------------------------------------------------------------------------
# Fine-tuning
# ---------------------------------------------------------------------------
def _fit(
    prepared: PreparedRun,
    model: ModelParams,
    epochs: int,
) -> list[EpochLoss]:
    """Fine-tune *model* in place; returns the per-epoch losses."""
    config = prepared.config
    features = prepared.features
    labels = prepared.train_labels
    train = prepared.split.train
    gat_params = list(model.gat_named().values())
    inter_params = list(model.inter_named().values())
    gat_opt = Adam(gat_params, config.gat_lr)
    inter_opt = Adam(inter_params, config.inter_lr)
    history: list[EpochLoss] = []

    for epoch in range(1, epochs + 1):
        with GradientTape() as tape:
            outputs = forward(model, prepared.graphs, features, prepared.key_rows)
            try:
                losses = compute_loss(model, outputs, labels, train, config)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(exc.phase, epoch, exc.value) from exc
        total = losses.total.item()
        if not math.isfinite(total):
            raise NonFiniteLossError("total", epoch, total)
        grads = tape.backward(losses.total)
        gat_opt.step([grads.of(p) for p in gat_params])
        inter_opt.step([grads.of(p) for p in inter_params])
        record = EpochLoss(
            epoch=epoch,
            total=total,
            auxiliary=losses.auxiliary.item(),
            distillation=losses.distillation.item() if losses.distillation is not None else 0.0,
            final=losses.final.item(),
        )
        history.append(record)
        if epoch == 1 or epoch % config.log_every == 0 or epoch == epochs:
            logger.info(
                "finetune epoch %d/%d total %.4f (ac %.4f, cd %.4f, final %.4f)",
                epoch,
                epochs,
                record.total,
                record.auxiliary,
                record.distillation,
                record.final,
            )
        else:
            logger.debug("finetune epoch %d total %.6f", epoch, record.total)
    return history


def run_finetune(
    dataset: Dataset,
    pretrained: dict[str, PretrainedWeights] | None,
    config: TrainConfig,
    switches: AblationSwitches | None = None,
    seed: int | None = None,
    prepared: PreparedRun | None = None,
) -> RunResult:
    """Fine-tune the full model and evaluate it on the test rows."""
    log: list[PipelineStep] = []
    t_start = time.perf_counter()
    switches = switches or AblationSwitches()

    if prepared is None:
        prepared, dt = _timed(prepare_run, dataset, config, switches, seed)
        log.append(
            PipelineStep(
                step="Prepare data and graphs",
                status=PipelineStatus.DONE,
                detail=(
                    f"{len(prepared.split.train)} train / {len(prepared.split.test)} test, "
                    f"mean degree {[round(g.n_edges / g.n, 1) for g in prepared.graphs]}"
                ),
                duration_ms=dt,
            )
        )
    seed = prepared.seed
    data = prepared.dataset

    encoders = None
    if pretrained is not None and switches.use_gcl:
        encoders = [pretrained[name].encoder for name in data.omics_names]
    model = build_model(
        [m.d for m in data.omics],
        data.omics_names,
        data.labels.n_classes,
        config,
        use_cd=switches.use_cd,
        seed=seed,
        encoders=encoders,
    )

    history, dt = _timed(_fit, prepared, model, config.finetune_epochs)
    log.append(
        PipelineStep(
            step="Fine-tune",
            status=PipelineStatus.DONE,
            detail=f"{config.finetune_epochs} epochs, arm {switches.label}",
            duration_ms=dt,
        )
    )

    trained = TrainedModel(prepared, model, switches)
    metrics, dt = _timed(evaluate, trained)
    log.append(
        PipelineStep(
            step="Evaluate",
            status=PipelineStatus.DONE,
            detail=f"test ACC {metrics.accuracy:.4f} on {metrics.n_samples} samples",
            duration_ms=dt,
        )
    )

    record = RunRecord(
        config=config,
        switches=switches,
        seed=seed,
        dataset=data.name,
        omics=data.omics_names,
        train_indices=prepared.split.train.tolist(),
        test_indices=prepared.split.test.tolist(),
        pretrain_losses={
            name: w.losses for name, w in (pretrained or {}).items() if name in data.omics_names
        },
        epoch_losses=history,
        metrics=metrics,
        pipeline_log=log,
        wall_time_s=time.perf_counter() - t_start,
    )
    return RunResult(record=record, trained=trained)


def run_experiment(
    dataset: Dataset,
    config: TrainConfig,
    switches: AblationSwitches | None = None,
    seed: int | None = None,
    checkpoint_dir: str | Path | None = None,
) -> RunResult:
    """Pretrain (or draw random encoders) and fine-tune for one seed."""
    switches = switches or AblationSwitches()
    prepared, dt_prep = _timed(prepare_run, dataset, config, switches, seed)
    pretrained, dt = _timed(
        run_pretrain, dataset, config, switches, prepared=prepared, checkpoint_dir=checkpoint_dir
    )
    result = run_finetune(dataset, pretrained, config, switches, prepared=prepared)
    result.record.pipeline_log[:0] = [
        PipelineStep(
            step="Prepare data and graphs",
            status=PipelineStatus.DONE,
            detail=f"{len(prepared.split.train)} train / {len(prepared.split.test)} test",
            duration_ms=dt_prep,
        ),
        PipelineStep(
            step="Contrastive pretraining",
            status=PipelineStatus.DONE if switches.use_gcl else PipelineStatus.SKIPPED,
            detail=(
                f"{config.pretrain_epochs} epochs per omics"
                if switches.use_gcl
                else "random encoder initialisation"
            ),
            duration_ms=dt,
        ),
    ]
    return result


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------
def rebuild_graphs(prepared: PreparedRun, matrices: Sequence[OmicsMatrix]) -> list[SampleGraph]:
    """Graphs over the features actually evaluated; all-zero rows keep only a self-loop."""
    config = prepared.config
    if config.inductive:
        return [
            build_inductive_graph(m, prepared.split.train, config.graph, isolate_zero_rows=True)
            for m in matrices
        ]
    return [build_graph(m, config.graph, isolate_zero_rows=True) for m in matrices]


def _probabilities(
    trained: TrainedModel,
    graphs: Sequence[SampleGraph],
    features: Sequence[Tensor],
) -> NDArray[np.float64]:
    """Softmax of the final head for given graphs and features."""
    outputs = forward(trained.model, graphs, features, trained.prepared.key_rows)
    return row_softmax(final_logits(outputs.z, trained.model.heads)).data


def predict_proba(
    trained: TrainedModel,
    matrices: Sequence[OmicsMatrix] | None = None,
) -> NDArray[np.float64]:
    """Class probabilities for every sample (no tape involved).

    With *matrices* the model sees those features, on graphs rebuilt from
    them; otherwise the prepared features and graphs are used.
    """
    prepared = trained.prepared
    if matrices is None:
        graphs, features = prepared.graphs, prepared.features
    else:
        graphs = rebuild_graphs(prepared, matrices)
        features = [Tensor(m.values) for m in matrices]
    return _probabilities(trained, graphs, features)


def evaluate(
    trained: TrainedModel,
    matrices: Sequence[OmicsMatrix] | None = None,
) -> MetricsReport:
    """Metrics on the test rows."""
    labels = trained.dataset.labels
    test = trained.prepared.split.test
    probs = predict_proba(trained, matrices)[test]
    return compute_metrics(
        probs.argmax(axis=1),
        probs[:, 1] if labels.task is Task.BINARY else None,
        labels.classes[test],
        labels.task,
        labels.n_classes,
    )


def missing_test_features(
    trained: TrainedModel,
    rate: float,
    seed: int,
) -> list[OmicsMatrix]:
    """Every omics with a *rate* share of its test cells zeroed."""
    test = trained.prepared.split.test.tolist()
    return [
        apply_missing(
            matrix,
            PerturbationSpec(rate=rate, seed=derived_seed(seed, "missing", rate, matrix.name), rows=test),
        )
        for matrix in trained.dataset.omics
    ]


def evaluate_missing(trained: TrainedModel, rate: float, seed: int) -> MetricsReport:
    """Test metrics after zeroing a *rate* share of test cells; graphs follow the corrupted data."""
    return evaluate(trained, missing_test_features(trained, rate, seed))


def edge_strengths(trained: TrainedModel) -> list[tuple[str, str, float]]:
    """Mean learned distillation strength per ordered omics pair."""
    model = trained.model
    if model.distill is None:
        return []
    prepared = trained.prepared
    outputs = forward(model, prepared.graphs, prepared.features, prepared.key_rows)
    return mean_edge_strengths(outputs.logits, model.distill, model.omics)


# ---------------------------------------------------------------------------
# Robustness
# ---------------------------------------------------------------------------
@dataclass
class RateSummary:
    rate: float
    n_runs: int
    mean: dict[str, float]
    std: dict[str, float]
    ci95: dict[str, float]


@dataclass
class RobustnessResult:
    rows: list[SweepRow]
    summary: list[RateSummary]


def _metric_values(report: MetricsReport) -> dict[str, float]:
    """Flat metric dict of a report, skipping undefined entries."""
    values = {
        "accuracy": report.accuracy,
        "f1_weighted": report.f1_weighted,
        "f1_macro": report.f1_macro,
    }
    if report.f1 is not None:
        values["f1"] = report.f1
    if report.auc is not None:
        values["auc"] = report.auc
    return values


def robustness_sweep(
    dataset: Dataset,
    config: TrainConfig,
    rates: Sequence[float] | None = None,
    seeds: Sequence[int] | None = None,
    switches: AblationSwitches | None = None,
) -> RobustnessResult:
    """Train once per seed on clean data, evaluate on test features with missing cells."""
    rates = list(config.missing_rates if rates is None else rates)
    seeds = list(seeds if seeds is not None else run_seeds(config))
    switches = switches or AblationSwitches()
    rows: list[SweepRow] = []
    for seed in seeds:
        trained = run_experiment(dataset, config, switches, seed).trained
        for rate in rates:
            metrics = evaluate_missing(trained, rate, seed)
            rows.append(SweepRow(arm=switches.label, seed=seed, rate=rate, metrics=metrics))
            logger.info("robustness seed %d rate %.2f ACC %.4f", seed, rate, metrics.accuracy)

    summary = []
    for rate in rates:
        per_rate = [_metric_values(r.metrics) for r in rows if r.rate == rate]
        keys = per_rate[0].keys()
        k = len(per_rate)
        mean = {key: float(np.mean([v[key] for v in per_rate])) for key in keys}
        std = {key: float(np.std([v[key] for v in per_rate], ddof=1)) if k > 1 else 0.0 for key in keys}
        ci95 = {key: 1.96 * std[key] / math.sqrt(k) for key in keys}
        summary.append(RateSummary(rate=rate, n_runs=k, mean=mean, std=std, ci95=ci95))
    return RobustnessResult(rows=rows, summary=summary)


# ---------------------------------------------------------------------------
# Feature ablation (biomarkers)
# ---------------------------------------------------------------------------
@dataclass
class BiomarkerReport:
    metric: AblationMetric
    baseline: float
    scores: dict[str, list[tuple[str, float]]]
    ranked: dict[str, list[BiomarkerEntry]] = field(default_factory=dict)

    @property
    def n_scores(self) -> int:
        return sum(len(v) for v in self.scores.values())


def check_ablation_metric(metric: AblationMetric, task: Task) -> None:
    """Reject a feature-ablation metric the task cannot produce."""
    if metric is AblationMetric.AUC and task is not Task.BINARY:
        raise ConfigError(f"ablation metric 'auc' needs a binary task, dataset is {task.value}.")


def _ablation_score(
    trained: TrainedModel,
    probs: NDArray[np.float64],
    metric: AblationMetric,
) -> float:
    """Test score of *probs* under the ablation metric."""
    labels = trained.dataset.labels
    test = trained.prepared.split.test
    y = labels.classes[test]
    p = probs[test]
    if metric is AblationMetric.LOG_LOSS:
        return float(log_loss(y, p, labels=list(range(labels.n_classes))))
    report = compute_metrics(
        p.argmax(axis=1),
        p[:, 1] if labels.task is Task.BINARY else None,
        y,
        labels.task,
        labels.n_classes,
    )
    if metric is AblationMetric.AUC:
        return report.auc  # binary only, see check_ablation_metric
    return report.accuracy if metric is AblationMetric.ACCURACY else report.f1_macro


def feature_ablation_rank(
    trained: TrainedModel,
    top_k: int = 30,
    metric: AblationMetric = AblationMetric.LOG_LOSS,
) -> BiomarkerReport:
    """Score each feature by the test-metric degradation when its column is zeroed.

    The ablated omics gets its graph rebuilt from the ablated features; the
    other omics keep their prepared graphs.
    """
    check_ablation_metric(metric, trained.dataset.labels.task)
    prepared = trained.prepared
    features = prepared.features
    baseline = _ablation_score(trained, predict_proba(trained), metric)
    sign = 1.0 if metric is AblationMetric.LOG_LOSS else -1.0
    scores: dict[str, list[tuple[str, float]]] = {}
    for m, matrix in enumerate(trained.dataset.omics):
        per_feature = []
        for j, feature in enumerate(matrix.feature_names):
            values = matrix.values.copy()
            values[:, j] = 0.0
            ablated = matrix.with_values(values)
            graphs = list(prepared.graphs)
            graphs[m] = rebuild_graphs(prepared, [ablated])[0]
            inputs = list(features)
            inputs[m] = Tensor(ablated.values)
            value = _ablation_score(trained, _probabilities(trained, graphs, inputs), metric)
            per_feature.append((feature, sign * (value - baseline)))
        scores[matrix.name] = per_feature
        logger.info("feature ablation %s: %d features scored", matrix.name, len(per_feature))

    ranked = {}
    for name, per_feature in scores.items():
        order = sorted(per_feature, key=lambda pair: pair[1], reverse=True)[:top_k]
        ranked[name] = [
            BiomarkerEntry(rank=r, omics=name, feature=feature, score=score)
            for r, (feature, score) in enumerate(order, start=1)
        ]
    return BiomarkerReport(metric=metric, baseline=baseline, scores=scores, ranked=ranked)


# ---------------------------------------------------------------------------
# Ablation / omics combinations
# ---------------------------------------------------------------------------
DEFAULT_ARMS = [
    AblationSwitches(use_gcl=True, use_cd=True),
    AblationSwitches(use_gcl=False, use_cd=True),
    AblationSwitches(use_gcl=True, use_cd=False),
    AblationSwitches(use_gcl=False, use_cd=False),
]


@dataclass
class AblationResult:
    rows: list[SweepRow]
    summary: list[AblationArmSummary]


def run_seeds(config: TrainConfig) -> list[int]:
    """Seeds of the repeated runs; each one varies both split and initialisation."""
    return [config.seed + r for r in range(config.n_runs)]


def omics_combinations(omics: Sequence[str]) -> list[list[str]]:
    """Every non-empty omics subset, smallest first."""
    return [
        list(subset)
        for size in range(1, len(omics) + 1)
        for subset in itertools.combinations(omics, size)
    ]


def _summarise(rows: list[SweepRow], arms: list[str]) -> list[AblationArmSummary]:
    """Mean, std and effect size vs the first arm, per arm."""
    def stats(arm: str, key: str) -> list[float]:
        out = []
        for r in rows:
            if r.arm != arm:
                continue
            value = getattr(r.metrics, key)
            if key == "f1" and value is None:
                value = r.metrics.f1_macro
            if value is not None:
                out.append(value)
        return out

    reference = stats(arms[0], "accuracy")
    summaries = []
    for arm in arms:
        acc = stats(arm, "accuracy")
        f1 = stats(arm, "f1")
        auc = stats(arm, "auc")
        effect = cohens = None
        if arm != arms[0]:
            effect = float(np.mean(reference) - np.mean(acc))
            pooled = math.sqrt((np.var(reference, ddof=1) + np.var(acc, ddof=1)) / 2) if len(acc) > 1 else 0.0
            cohens = effect / pooled if pooled > 0 else None
        summaries.append(
            AblationArmSummary(
                arm=arm,
                n_runs=len(acc),
                accuracy_mean=float(np.mean(acc)),
                accuracy_std=float(np.std(acc, ddof=1)) if len(acc) > 1 else 0.0,
                f1_mean=float(np.mean(f1)),
                f1_std=float(np.std(f1, ddof=1)) if len(f1) > 1 else 0.0,
                auc_mean=float(np.mean(auc)) if auc else None,
                effect_vs_full=effect,
                cohens_d=cohens,
            )
        )
    return summaries


def run_ablation(
    dataset: Dataset,
    config: TrainConfig,
    seeds: Sequence[int] | None = None,
    arms: Sequence[AblationSwitches] | None = None,
    combinations: bool = False,
) -> AblationResult:
    """Component ablation (and optionally every omics subset) over several seeds.

    Per seed the split, graphs and pretrained encoders are shared by all arms,
    so each arm differs from the full model only in its switched component.
    """
    seeds = list(seeds if seeds is not None else run_seeds(config))
    arms = list(arms or DEFAULT_ARMS)
    if combinations:
        arms += [
            AblationSwitches(omics=subset)
            for subset in omics_combinations(dataset.omics_names)
            if len(subset) < len(dataset.omics_names)
        ]
    rows: list[SweepRow] = []
    for seed in seeds:
        prepared = prepare_run(dataset, config, AblationSwitches(), seed)
        pretrained = run_pretrain(dataset, config, AblationSwitches(), prepared=prepared)
        for switches in arms:
            subset = prepared if not switches.omics else prepare_run(dataset, config, switches, seed)
            result = run_finetune(dataset, pretrained, config, switches, prepared=subset)
            rows.append(SweepRow(arm=switches.label, seed=seed, metrics=result.record.metrics))
            logger.info(
                "ablation seed %d arm %s ACC %.4f",
                seed,
                switches.label,
                result.record.metrics.accuracy,
            )
    return AblationResult(rows=rows, summary=_summarise(rows, [a.label for a in arms]))


# ---------------------------------------------------------------------------
# Masking-probability grid search
# ---------------------------------------------------------------------------
@dataclass
class GridPoint:
    p1: float
    p2: float
    metrics: MetricsReport


def grid_search_masking(
    dataset: Dataset,
    config: TrainConfig,
    values: Sequence[float] = (0.2, 0.4, 0.6, 0.8),
    seed: int | None = None,
    include_default: bool = True,
) -> list[GridPoint]:
    """Pretrain + fine-tune for every ``(p1, p2)`` pair of the grid."""
    pairs = [(p1, p2) for p1 in values for p2 in values]
    if include_default and (config.p1, config.p2) not in pairs:
        pairs.append((config.p1, config.p2))
    points = []
    for p1, p2 in pairs:
        cfg = config.model_copy(update={"p1": p1, "p2": p2})
        result = run_experiment(dataset, cfg, AblationSwitches(), seed)
        points.append(GridPoint(p1, p2, result.record.metrics))
        logger.info("grid p1=%.2f p2=%.2f ACC %.4f", p1, p2, result.record.metrics.accuracy)
    return points
