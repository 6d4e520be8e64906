"""
Command-line interface.

Usage
-----
    python -m app synth --out data/synth --n 200 --dims 200,200,200
    python -m app train --data data/synth --seed 7 --out out
    python -m app evaluate --data data/synth --out out --missing-rate 0.4
    python -m app ablate --data data/synth --combinations
    python -m app robustness --data data/synth --rates 0,0.2,0.4,0.6,0.8
    python -m app biomarkers --data data/synth --top-k 20
    python -m app gridsearch --data data/synth --values 0.2,0.4,0.6,0.8

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from threadpoolctl import threadpool_limits

from app import __version__
from app.config import OUT_DIR, THREADS, configure_logging, dump_train_config, load_train_config
from app.data import Dataset, load_dataset, synthesize_dataset, write_dataset
from app.errors import MVKTransError, UsageError
from app.pipeline import (
    check_ablation_metric,
    edge_strengths,
    evaluate,
    evaluate_missing,
    feature_ablation_rank,
    grid_search_masking,
    robustness_sweep,
    run_ablation,
    run_experiment,
    run_pretrain,
    run_seeds,
)
from app.results import (
    checkpoint_dir,
    load_model,
    read_run_record,
    save_model,
    write_ablation,
    write_biomarkers,
    write_edges,
    write_graphs,
    write_grid,
    write_metrics,
    write_robustness,
    write_run_record,
)
from app.schemas import AblationMetric, AblationSwitches, TrainConfig

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors map to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(raw: str) -> list[float]:
    """Parse ``"0,0.2,0.4"`` into floats."""
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from exc


def _int_list(raw: str) -> list[int]:
    """Parse ``"200,200"`` into integers."""
    try:
        return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from exc


def _rate(raw: str) -> float:
    """Parse a single rate in [0, 1]."""
    try:
        value = float(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"rate must lie in [0, 1], got {value}")
    return value


def _name_list(raw: str) -> list[str]:
    """Parse a non-empty comma-separated name list."""
    names = [v.strip() for v in raw.split(",") if v.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected at least one omics name")
    return names


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def _run_options() -> argparse.ArgumentParser:
    """Options shared by every command that trains or evaluates."""
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value training-config file")
    common.add_argument("--data", type=Path, required=True, help="dataset directory")
    common.add_argument("--seed", type=int, help="run seed (split and initialisation)")
    common.add_argument("--out", type=Path, default=Path(OUT_DIR), help="output directory")
    common.add_argument("--omics", type=_name_list, help="comma-separated omics subset")
    common.add_argument("--no-gcl", action="store_true", help="random encoders, no pretraining")
    common.add_argument("--no-cd", action="store_true", help="fully connected fusion instead of distillation")
    common.add_argument("--inductive", action="store_true", default=None, help="train-only graphs")
    common.add_argument(
        "--symmetric-cd-grad",
        action="store_true",
        default=None,
        help="let distillation gradients reach the source omics too",
    )
    common.add_argument("--pretrain-epochs", type=int)
    common.add_argument("--finetune-epochs", type=int)
    common.add_argument("--runs", type=int, help="number of seeds for harnesses")
    return common


def build_parser() -> argparse.ArgumentParser:
    """The ``mvktrans`` parser with one sub-command per experiment."""
    parser = _Parser(prog="mvktrans", description="Multi-omics classification with knowledge transfer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="override MVKT_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _run_options()

    sub.add_parser("pretrain", parents=[common], help="contrastive pretraining of every encoder")

    train = sub.add_parser("train", parents=[common], help="pretrain, fine-tune and evaluate")
    train.add_argument("--dump-edges", action="store_true", help="write out/edges.csv")
    train.add_argument("--dump-graph", action="store_true", help="write out/graph_<omics>.csv")

    ev = sub.add_parser("evaluate", parents=[common], help="re-evaluate the model saved in --out")
    ev.add_argument("--missing-rate", type=_rate, default=0.0, help="share of test cells zeroed")

    ablate = sub.add_parser("ablate", parents=[common], help="component ablation over seeds")
    ablate.add_argument("--combinations", action="store_true", help="also run every omics subset")

    rob = sub.add_parser("robustness", parents=[common], help="missing-feature sweep")
    rob.add_argument("--rates", type=_float_list, help="comma-separated missing rates")

    bio = sub.add_parser("biomarkers", parents=[common], help="feature-ablation ranking")
    bio.add_argument("--top-k", type=int)
    bio.add_argument("--metric", type=AblationMetric, choices=list(AblationMetric))

    grid = sub.add_parser("gridsearch", parents=[common], help="(p1, p2) masking grid")
    grid.add_argument("--values", type=_float_list, default=[0.2, 0.4, 0.6, 0.8])

    synth = sub.add_parser("synth", help="write a synthetic dataset")
    synth.add_argument("--out", type=Path, required=True, help="dataset directory to create")
    synth.add_argument("--n", type=int, default=200)
    synth.add_argument("--dims", type=_int_list, default=[200, 200, 200])
    synth.add_argument("--classes", type=int, default=2)
    synth.add_argument("--informativeness", type=_float_list, default=[0.3, 0.2, 0.1])
    synth.add_argument("--omics", type=_name_list)
    synth.add_argument("--name", default="synthetic")
    synth.add_argument("--seed", type=int, default=0)
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def _config(args: argparse.Namespace) -> TrainConfig:
    """Training config from ``--config`` plus command-line overrides."""
    return load_train_config(
        args.config,
        seed=args.seed,
        inductive=args.inductive,
        symmetric_cd_grad=args.symmetric_cd_grad,
        pretrain_epochs=args.pretrain_epochs,
        finetune_epochs=args.finetune_epochs,
        n_runs=args.runs,
        missing_rates=getattr(args, "rates", None),
        biomarker_top_k=getattr(args, "top_k", None),
        ablation_metric=getattr(args, "metric", None),
    )


def _switches(args: argparse.Namespace) -> AblationSwitches:
    """Ablation switches from ``--no-gcl`` / ``--no-cd`` / ``--omics``."""
    return AblationSwitches(use_gcl=not args.no_gcl, use_cd=not args.no_cd, omics=args.omics)


def _emit(payload: object) -> None:
    """Print *payload* as sorted JSON on stdout."""
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_pretrain(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Pretrain every encoder and write its checkpoint."""
    weights = run_pretrain(
        dataset, config, _switches(args), checkpoint_dir=checkpoint_dir(args.out)
    )
    _emit(
        {
            name: {"kind": w.kind.value, "final_loss": w.losses[-1] if w.losses else None}
            for name, w in weights.items()
        }
    )


def _cmd_train(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """One full run; writes metrics, record, config and checkpoints."""
    result = run_experiment(dataset, config, _switches(args), checkpoint_dir=checkpoint_dir(args.out))
    save_model(result.trained, args.out)
    write_metrics(result.record, args.out)
    write_run_record(result.record, args.out)
    dump_train_config(config, args.out / "config.txt")
    if args.dump_edges:
        write_edges(edge_strengths(result.trained), args.out)
    if args.dump_graph:
        write_graphs(result.trained, args.out)
    _emit(result.record.metrics.model_dump(mode="json"))


def _cmd_evaluate(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Re-evaluate the saved model, optionally under missing features."""
    record = read_run_record(args.out)
    trained = load_model(dataset, record, args.out)
    if args.missing_rate > 0:
        metrics = evaluate_missing(trained, args.missing_rate, record.seed)
    else:
        metrics = evaluate(trained)
    _emit(metrics.model_dump(mode="json"))


def _cmd_ablate(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Component ablation (and omics combinations) over seeds."""
    result = run_ablation(dataset, config, run_seeds(config), combinations=args.combinations)
    write_ablation(result, args.out)
    _emit([s.model_dump(mode="json") for s in result.summary])


def _cmd_robustness(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Missing-rate sweep over seeds."""
    result = robustness_sweep(dataset, config, switches=_switches(args))
    write_robustness(result, args.out)
    _emit([{"rate": s.rate, "mean": s.mean, "ci95": s.ci95} for s in result.summary])


def _cmd_biomarkers(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Train once and rank features by ablation."""
    check_ablation_metric(config.ablation_metric, dataset.labels.task)
    result = run_experiment(dataset, config, _switches(args))
    report = feature_ablation_rank(result.trained, config.biomarker_top_k, config.ablation_metric)
    write_biomarkers(report, args.out)
    _emit({omics: [e.feature for e in entries] for omics, entries in report.ranked.items()})


def _cmd_gridsearch(args: argparse.Namespace, dataset: Dataset, config: TrainConfig) -> None:
    """Evaluate the (p1, p2) masking grid."""
    points = grid_search_masking(dataset, config, args.values)
    write_grid(points, args.out)
    _emit([{"p1": p.p1, "p2": p.p2, "accuracy": p.metrics.accuracy} for p in points])


def _cmd_synth(args: argparse.Namespace) -> None:
    """Write a synthetic dataset."""
    dataset = synthesize_dataset(
        args.n,
        args.dims,
        args.classes,
        args.informativeness,
        seed=args.seed,
        omics_names=args.omics,
        name=args.name,
    )
    write_dataset(dataset, args.out)
    _emit({"name": dataset.name, "n": dataset.n, "omics": dataset.omics_names, "dims": args.dims})


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "robustness": _cmd_robustness,
    "biomarkers": _cmd_biomarkers,
    "gridsearch": _cmd_gridsearch,
}


def _dispatch(args: argparse.Namespace) -> None:
    """Load config and dataset, then run the command under the thread cap."""
    if args.command == "synth":
        _cmd_synth(args)
        return
    config = _config(args)
    dataset = load_dataset(args.data)
    logger.info(
        "Dataset %s: %d samples, omics %s, %d classes",
        dataset.name,
        dataset.n,
        dataset.omics_names,
        dataset.labels.n_classes,
    )
    # a single kernel thread keeps BLAS reductions in a fixed order
    limits = THREADS or (1 if config.deterministic else None)
    with threadpool_limits(limits=limits):
        _COMMANDS[args.command](args, dataset, config)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.log_level)
        _dispatch(args)
    except MVKTransError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0
