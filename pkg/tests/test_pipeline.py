"""Tests for the pipeline orchestrator, experiment harnesses and result files."""

from __future__ import annotations

import dataclasses
import json

import numpy as np
import pandas as pd
import pytest

from app import pipeline
from app.checkpoint import read_checkpoint
from app.data import LabelVector, synthesize_dataset
from app.errors import CheckpointError, ConfigError, NonFiniteLossError
from app.pipeline import (
    edge_strengths,
    evaluate,
    evaluate_missing,
    feature_ablation_rank,
    grid_search_masking,
    missing_test_features,
    omics_combinations,
    predict_proba,
    prepare_run,
    rebuild_graphs,
    robustness_sweep,
    run_ablation,
    run_experiment,
    run_finetune,
    run_pretrain,
    run_seeds,
)
from app.results import (
    load_model,
    save_model,
    write_ablation,
    write_biomarkers,
    write_metrics,
    write_robustness,
)
from app.schemas import AblationMetric, AblationSwitches, CheckpointKind, PipelineStatus, TrainConfig

NO_GCL = AblationSwitches(use_gcl=False)
NO_CD = AblationSwitches(use_cd=False)


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------
def test_prepare_run(toy_dataset, tiny_config):
    prepared = prepare_run(toy_dataset, tiny_config)
    assert len(prepared.graphs) == 3
    assert prepared.key_rows is None
    labels = prepared.train_labels
    assert (labels[prepared.split.test] == -1).all()
    assert np.array_equal(labels[prepared.split.train], toy_dataset.labels.classes[prepared.split.train])


def test_prepare_run_subset_and_inductive(toy_dataset, tiny_config):
    config = tiny_config.model_copy(update={"inductive": True})
    prepared = prepare_run(toy_dataset, config, AblationSwitches(omics=["omics3", "omics1"]))
    assert prepared.dataset.omics_names == ["omics1", "omics3"]
    assert np.array_equal(prepared.key_rows, prepared.split.train)
    assert not any(g.symmetric for g in prepared.graphs)


def test_run_experiment_record(toy_dataset, tiny_config):
    record = run_experiment(toy_dataset, tiny_config, seed=4).record
    assert record.seed == 4
    assert record.omics == toy_dataset.omics_names
    assert len(record.epoch_losses) == tiny_config.finetune_epochs
    assert all(len(v) == tiny_config.pretrain_epochs for v in record.pretrain_losses.values())
    assert [s.step for s in record.pipeline_log] == [
        "Prepare data and graphs",
        "Contrastive pretraining",
        "Fine-tune",
        "Evaluate",
    ]
    assert record.metrics.n_samples == len(record.test_indices)
    assert set(record.train_indices).isdisjoint(record.test_indices)


def test_run_is_deterministic(toy_dataset, tiny_config):
    a = run_experiment(toy_dataset, tiny_config, seed=1).record
    b = run_experiment(toy_dataset, tiny_config, seed=1).record
    assert a.metrics == b.metrics
    assert a.epoch_losses == b.epoch_losses
    assert a.pretrain_losses == b.pretrain_losses


def test_no_gcl_skips_pretraining(toy_dataset, tiny_config):
    record = run_experiment(toy_dataset, tiny_config, NO_GCL).record
    assert record.pipeline_log[1].status is PipelineStatus.SKIPPED
    assert all(v == [] for v in record.pretrain_losses.values())


def test_no_cd_has_no_distillation_term(toy_dataset, tiny_config):
    result = run_experiment(toy_dataset, tiny_config, NO_CD)
    assert all(e.distillation == 0.0 for e in result.record.epoch_losses)
    assert edge_strengths(result.trained) == []


def test_edge_strengths_cover_every_pair(toy_dataset, tiny_config):
    trained = run_experiment(toy_dataset, tiny_config).trained
    rows = edge_strengths(trained)
    assert len(rows) == 6
    assert all(0 < s < 1 for _, _, s in rows)


def test_test_labels_never_reach_training(toy_dataset, tiny_config):
    prepared = prepare_run(toy_dataset, tiny_config)
    test = prepared.split.test
    labels = prepared.dataset.labels
    flipped = labels.classes.copy()
    flipped[test] = 1 - flipped[test]
    relabelled = dataclasses.replace(
        prepared,
        dataset=dataclasses.replace(
            prepared.dataset, labels=LabelVector(labels.sample_ids, flipped, labels.class_names)
        ),
    )
    a = run_finetune(toy_dataset, None, tiny_config, NO_GCL, prepared=prepared).record
    b = run_finetune(toy_dataset, None, tiny_config, NO_GCL, prepared=relabelled).record
    assert a.epoch_losses == b.epoch_losses


def test_pretrain_checkpoints(toy_dataset, tiny_config, tmp_path):
    weights = run_pretrain(toy_dataset, tiny_config, checkpoint_dir=tmp_path)
    assert set(weights) == set(toy_dataset.omics_names)
    for name in toy_dataset.omics_names:
        ckpt = read_checkpoint(tmp_path / f"pretrain_{name}.ckpt")
        assert ckpt.kind is CheckpointKind.PRETRAINED
        assert ckpt.config_hash == tiny_config.fingerprint()
        assert all(key.startswith(f"gat.{name}.") for key in ckpt.state)


def test_random_encoders_are_tagged(toy_dataset, tiny_config, tmp_path):
    run_pretrain(toy_dataset, tiny_config, NO_GCL, checkpoint_dir=tmp_path)
    assert read_checkpoint(tmp_path / "pretrain_omics1.ckpt").kind is CheckpointKind.RANDOM


def test_zero_pretrain_epochs_keep_initialisation(toy_dataset, tiny_config):
    config = tiny_config.model_copy(update={"pretrain_epochs": 0})
    trained = run_pretrain(toy_dataset, config)
    random = run_pretrain(toy_dataset, config, NO_GCL)
    for name in toy_dataset.omics_names:
        for p, q in zip(trained[name].encoder.parameters(), random[name].encoder.parameters()):
            assert np.array_equal(p.data, q.data)


def test_non_finite_loss_reports_epoch(toy_dataset, tiny_config, monkeypatch):
    def broken(*args, **kwargs):
        raise NonFiniteLossError("final", None, float("nan"))

    monkeypatch.setattr(pipeline, "compute_loss", broken)
    with pytest.raises(NonFiniteLossError) as info:
        run_experiment(toy_dataset, tiny_config, NO_GCL)
    assert info.value.epoch == 1
    assert info.value.phase == "final"


def test_single_omics_run(toy_dataset, tiny_config):
    record = run_experiment(toy_dataset, tiny_config, AblationSwitches(omics=["omics2"])).record
    assert record.omics == ["omics2"]
    assert all(e.distillation == 0.0 for e in record.epoch_losses)


# ---------------------------------------------------------------------------
# Saved models
# ---------------------------------------------------------------------------
def test_save_and_load_model(toy_dataset, tiny_config, tmp_path):
    result = run_experiment(toy_dataset, tiny_config, seed=2)
    save_model(result.trained, tmp_path)
    reloaded = load_model(toy_dataset, result.record, tmp_path)
    assert evaluate(reloaded) == result.record.metrics


def test_load_model_rejects_other_config(toy_dataset, tiny_config, tmp_path):
    result = run_experiment(toy_dataset, tiny_config)
    save_model(result.trained, tmp_path)
    other = result.record.model_copy(update={"config": tiny_config.model_copy(update={"delta": 0.2})})
    with pytest.raises(CheckpointError):
        load_model(toy_dataset, other, tmp_path)


def test_metrics_file_is_reproducible(toy_dataset, tiny_config, tmp_path):
    a = write_metrics(run_experiment(toy_dataset, tiny_config, seed=3).record, tmp_path / "a")
    b = write_metrics(run_experiment(toy_dataset, tiny_config, seed=3).record, tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    payload = json.loads(a.read_text())
    assert payload["seed"] == 3 and payload["arm"] == "full"


# ---------------------------------------------------------------------------
# Harnesses
# ---------------------------------------------------------------------------
def test_run_seeds_and_combinations(tiny_config):
    assert run_seeds(tiny_config.model_copy(update={"seed": 10, "n_runs": 3})) == [10, 11, 12]
    combos = omics_combinations(["a", "b", "c"])
    assert len(combos) == 7
    assert combos[-1] == ["a", "b", "c"]


def test_robustness_sweep_shape(toy_dataset, tiny_config, tmp_path):
    rates = [0.0, 0.2, 0.4, 0.6, 0.8]
    result = robustness_sweep(toy_dataset, tiny_config, rates=rates, seeds=range(5))
    assert len(result.rows) == 25
    assert [s.rate for s in result.summary] == rates
    assert all(s.n_runs == 5 for s in result.summary)
    assert all(s.ci95["accuracy"] >= 0 for s in result.summary)
    paths = write_robustness(result, tmp_path)
    assert len(pd.read_csv(paths[0])) == 25


def test_robustness_rate_zero_matches_clean_run(toy_dataset, tiny_config):
    result = robustness_sweep(toy_dataset, tiny_config, rates=[0.0], seeds=[6])
    clean = run_experiment(toy_dataset, tiny_config, seed=6).record.metrics
    assert result.rows[0].metrics == clean


def test_missing_features_rebuild_graphs(toy_dataset, tiny_config):
    trained = run_experiment(toy_dataset, tiny_config).trained
    test = trained.prepared.split.test
    matrices = missing_test_features(trained, 1.0, 0)
    assert all(not m.values[test].any() for m in matrices)
    for graph in rebuild_graphs(trained.prepared, matrices):
        assert np.array_equal(graph.edges[test][:, test], np.eye(len(test), dtype=bool))
        assert (graph.edges[test].sum(axis=1) == 1).all()


def test_fully_missing_test_features_give_chance_level(toy_dataset, tiny_config):
    trained = run_experiment(toy_dataset, tiny_config).trained
    test = trained.prepared.split.test
    probs = predict_proba(trained, missing_test_features(trained, 1.0, 0))[test]
    # no test information left: every test sample gets the same prediction
    assert np.allclose(probs, probs[0], atol=1e-12)
    y = toy_dataset.labels.classes[test]
    report = evaluate_missing(trained, 1.0, 0)
    assert report.accuracy == pytest.approx(np.mean(y == probs[0].argmax()))
    assert report.accuracy <= np.bincount(y).max() / len(y)


def test_inductive_missing_features(toy_dataset, tiny_config):
    config = tiny_config.model_copy(update={"inductive": True})
    trained = run_experiment(toy_dataset, config).trained
    test = trained.prepared.split.test
    probs = predict_proba(trained, missing_test_features(trained, 1.0, 3))[test]
    assert np.allclose(probs, probs[0], atol=1e-12)


def test_feature_ablation_scores_every_feature(toy_dataset, tiny_config, tmp_path):
    trained = run_experiment(toy_dataset, tiny_config).trained
    report = feature_ablation_rank(trained, top_k=4)
    assert report.n_scores == sum(m.d for m in toy_dataset.omics)
    for name, entries in report.ranked.items():
        assert [e.rank for e in entries] == [1, 2, 3, 4]
        assert all(a.score >= b.score for a, b in zip(entries, entries[1:]))
    paths = write_biomarkers(report, tmp_path)
    assert len(paths) == 4
    assert len(pd.read_csv(tmp_path / "sweeps" / "feature_ablation.csv")) == report.n_scores


def test_feature_ablation_accuracy_metric(toy_dataset, tiny_config):
    trained = run_experiment(toy_dataset, tiny_config).trained
    report = feature_ablation_rank(trained, top_k=2, metric=AblationMetric.ACCURACY)
    assert report.baseline == evaluate(trained).accuracy


def test_auc_ablation_needs_binary_task(tiny_config):
    data = synthesize_dataset(30, [5, 4], 3, [0.5, 0.5], seed=1)
    trained = run_experiment(data, tiny_config).trained
    with pytest.raises(ConfigError, match="binary"):
        feature_ablation_rank(trained, metric=AblationMetric.AUC)


def test_ablation_arms(toy_dataset, tiny_config, tmp_path):
    result = run_ablation(toy_dataset, tiny_config, seeds=[0, 1])
    assert [s.arm for s in result.summary] == ["full", "no-gcl", "no-cd", "baseline"]
    assert len(result.rows) == 8
    assert result.summary[0].effect_vs_full is None
    assert all(s.effect_vs_full is not None for s in result.summary[1:])
    summary_path = write_ablation(result, tmp_path)[1]
    assert len(pd.read_csv(summary_path)) == 4


def test_ablation_full_arm_matches_single_run(toy_dataset, tiny_config):
    result = run_ablation(toy_dataset, tiny_config, seeds=[5], arms=[AblationSwitches()])
    assert result.rows[0].metrics == run_experiment(toy_dataset, tiny_config, seed=5).record.metrics


def test_ablation_with_combinations(toy_dataset, tiny_config):
    config = tiny_config.model_copy(update={"finetune_epochs": 1, "pretrain_epochs": 1})
    result = run_ablation(toy_dataset, config, seeds=[0], combinations=True)
    assert len(result.summary) == 4 + 6
    assert "full[omics1+omics3]" in {s.arm for s in result.summary}


def test_grid_search_masking(toy_dataset, tiny_config):
    config = tiny_config.model_copy(update={"finetune_epochs": 1, "pretrain_epochs": 1})
    points = grid_search_masking(toy_dataset, config, values=(0.2, 0.8))
    assert [(p.p1, p.p2) for p in points] == [(0.2, 0.2), (0.2, 0.8), (0.8, 0.2), (0.8, 0.8), (0.3, 0.2)]


# ---------------------------------------------------------------------------
# Acceptance runs
# ---------------------------------------------------------------------------
@pytest.mark.slow
def test_converges_on_informative_synthetic_data():
    data = synthesize_dataset(200, [200, 200, 200], 2, [0.3, 0.2, 0.1], seed=0)
    config = TrainConfig(pretrain_epochs=100, finetune_epochs=500, log_every=100)
    accuracies = [run_experiment(data, config, seed=s).record.metrics.accuracy for s in range(5)]
    assert sum(acc >= 0.9 for acc in accuracies) >= 4


@pytest.mark.slow
def test_full_model_beats_single_component_ablations():
    data = synthesize_dataset(200, [100, 100, 100], 2, [0.1, 0.05, 0.02], seed=1)
    config = TrainConfig(pretrain_epochs=200, finetune_epochs=300, n_runs=5, log_every=100)
    result = run_ablation(data, config)
    by_arm = {s.arm: s for s in result.summary}
    full = by_arm["full"]
    assert full.n_runs == 5
    for arm in ("no-gcl", "no-cd"):
        assert full.accuracy_mean >= by_arm[arm].accuracy_mean
        assert by_arm[arm].effect_vs_full == pytest.approx(full.accuracy_mean - by_arm[arm].accuracy_mean)
        assert by_arm[arm].effect_vs_full >= 0
    for s in result.summary[1:]:
        # Cohen's d is undefined only when both arms have zero spread
        assert s.cohens_d is not None or s.accuracy_std == full.accuracy_std == 0.0


@pytest.mark.slow
def test_accuracy_degrades_with_missing_rate():
    data = synthesize_dataset(200, [200, 200, 200], 2, [0.3, 0.2, 0.1], seed=2)
    config = TrainConfig(pretrain_epochs=100, finetune_epochs=300, log_every=100)
    result = robustness_sweep(data, config, rates=[0.0, 0.2, 0.4, 0.6, 0.8], seeds=range(5))
    for key in ("accuracy", "f1", "auc"):
        for lower, higher in zip(result.summary, result.summary[1:]):
            band = max(lower.std[key], higher.std[key])
            assert higher.mean[key] <= lower.mean[key] + band, (key, lower.rate, higher.rate)


@pytest.mark.slow
def test_planted_features_rank_high():
    config = TrainConfig(pretrain_epochs=100, finetune_epochs=300, log_every=100)
    hits = 0
    for seed in range(5):
        data = synthesize_dataset(200, [50, 50, 50], 2, [0.1, 0.1, 0.1], seed=seed)
        trained = run_experiment(data, config, seed=seed).trained
        report = feature_ablation_rank(trained, top_k=20)
        if all(sum("_sig" in e.feature for e in entries) >= 3 for entries in report.ranked.values()):
            hits += 1
    assert hits >= 4
