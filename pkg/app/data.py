"""
Multiomics datasets: loading, synthesis, standardisation, splitting and
missing-feature perturbation.

A dataset directory holds one CSV per omics (``omics_<k>.csv``, first
column ``sample_id``, header = feature names), ``labels.csv``
(``sample_id,label``) and ``meta.json`` (``name``, ``omics``, ``classes``).
The raw MOGONET release layout (``<k>_tr.csv`` / ``<k>_te.csv`` /
``<k>_featname.csv`` / ``labels_tr.csv`` / ``labels_te.csv``) is also read.

Public API
----------
load_dataset(directory) -> Dataset
write_dataset(dataset, directory)
synthesize_dataset(n, dims, n_classes, informativeness, seed) -> Dataset
standardize(train, apply_to) -> OmicsMatrix
standardize_dataset(dataset, train_indices) -> Dataset
stratified_split(labels, test_fraction, seed) -> SplitPlan
apply_missing(matrix, spec) -> OmicsMatrix
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from app.errors import (
    DatasetFileMissingError,
    InvalidDatasetError,
    NonNumericCellError,
    RaggedRowError,
    SampleMismatchError,
    SplitError,
)
from app.schemas import PerturbationSpec, Task

logger = logging.getLogger(__name__)

_MOGONET_OMICS = ["mRNA", "methy", "miRNA"]
_CONSTANT_STD = 1e-12


# ---------------------------------------------------------------------------
# Domain containers
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class OmicsMatrix:
    """One omics feature table (n samples x d features)."""

    name: str
    sample_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape != (
            len(self.sample_ids),
            len(self.feature_names),
        ):
            raise InvalidDatasetError(
                f"{self.name}: values shape {values.shape} does not match "
                f"{len(self.sample_ids)} samples x {len(self.feature_names)} features."
            )
        if values.shape[1] < 1:
            raise InvalidDatasetError(f"{self.name}: no features.")
        if not np.isfinite(values).all():
            raise NonNumericCellError(f"{self.name}: non-finite values.")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: NDArray[np.float64]) -> OmicsMatrix:
        """Same ids and name over new values."""
        return replace(self, values=values)


@dataclass(frozen=True)
class LabelVector:
    """Class index per sample."""

    sample_ids: tuple[str, ...]
    classes: NDArray[np.int64]
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        classes = np.asarray(self.classes, dtype=np.int64)
        object.__setattr__(self, "classes", classes)
        c = len(self.class_names)
        if classes.shape != (len(self.sample_ids),):
            raise InvalidDatasetError("labels and sample ids differ in length.")
        if classes.size and (classes.min() < 0 or classes.max() >= c):
            raise InvalidDatasetError(f"class indices must lie in [0, {c}).")
        missing = sorted(set(range(c)) - set(classes.tolist()))
        if missing:
            raise InvalidDatasetError(f"classes without samples: {missing}.")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def task(self) -> Task:
        return Task.BINARY if self.n_classes == 2 else Task.MULTICLASS


@dataclass(frozen=True)
class Dataset:
    """Aligned omics matrices plus labels."""

    name: str
    omics: list[OmicsMatrix]
    labels: LabelVector

    @property
    def omics_names(self) -> list[str]:
        return [m.name for m in self.omics]

    @property
    def n(self) -> int:
        return len(self.labels.sample_ids)

    def select(self, names: Sequence[str] | None) -> Dataset:
        """Keep only the named omics, in the dataset's own order."""
        if not names:
            return self
        unknown = set(names) - set(self.omics_names)
        if unknown:
            raise InvalidDatasetError(
                f"unknown omics {sorted(unknown)}; available {self.omics_names}."
            )
        return replace(self, omics=[m for m in self.omics if m.name in names])

    def with_omics(self, omics: list[OmicsMatrix]) -> Dataset:
        """Same samples and labels over replaced omics matrices."""
        return replace(self, omics=omics)


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint, stratified train/test sample indices."""

    train: NDArray[np.int64]
    test: NDArray[np.int64]
    seed: int


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------
def _require(path: Path) -> Path:
    """Return *path* or raise ``DatasetFileMissingError``."""
    if not path.is_file():
        raise DatasetFileMissingError(f"Missing dataset file: {path}")
    return path


def _read_table(path: Path, header: bool = True) -> pd.DataFrame:
    """Read a CSV with string cells; ragged rows raise ``RaggedRowError``."""
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.ParserError as exc:
        raise RaggedRowError(f"{path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise InvalidDatasetError(f"{path}: empty file.") from exc
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        row = int(np.flatnonzero(short)[0])
        raise RaggedRowError(
            f"{path}: data row {row + 1} has fewer fields than the header."
        )
    return frame


def _to_float(frame: pd.DataFrame, path: Path) -> NDArray[np.float64]:
    """Convert every cell to float, naming the first non-numeric or non-finite one."""
    raw = frame.to_numpy(dtype=str)
    try:
        values = raw.astype(np.float64)
    except ValueError:
        values = None
    bad = None
    if values is None:
        coerced = frame.apply(pd.to_numeric, errors="coerce").to_numpy()
        bad = np.argwhere(np.isnan(coerced))
    elif not np.isfinite(values).all():
        bad = np.argwhere(~np.isfinite(values))
    if bad is not None and len(bad):
        r, c = (int(v) for v in bad[0])
        raise NonNumericCellError(
            f"{path}: cell (row {r + 1}, column {frame.columns[c]!r}) = "
            f"{raw[r, c]!r} is not a finite number."
        )
    if values is None:
        values = frame.apply(pd.to_numeric).to_numpy(dtype=np.float64)
    return values


def _read_omics_csv(path: Path, name: str) -> OmicsMatrix:
    """One canonical ``omics_<k>.csv`` as an ``OmicsMatrix``."""
    frame = _read_table(_require(path))
    if frame.shape[1] < 2:
        raise InvalidDatasetError(f"{path}: expected sample_id plus >= 1 feature column.")
    sample_ids = tuple(frame.iloc[:, 0].astype(str))
    features = frame.iloc[:, 1:]
    return OmicsMatrix(
        name=name,
        sample_ids=sample_ids,
        feature_names=tuple(str(c) for c in features.columns),
        values=_to_float(features, path),
    )


def _align(matrix: OmicsMatrix, sample_ids: tuple[str, ...]) -> OmicsMatrix:
    """Reorder *matrix* rows to *sample_ids*."""
    if matrix.sample_ids == sample_ids:
        return matrix
    if len(matrix.sample_ids) != len(sample_ids):
        raise SampleMismatchError(
            f"{matrix.name}: {len(matrix.sample_ids)} samples, labels have {len(sample_ids)}."
        )
    position = {sid: i for i, sid in enumerate(matrix.sample_ids)}
    missing = [sid for sid in sample_ids if sid not in position]
    if missing:
        raise SampleMismatchError(f"{matrix.name}: sample {missing[0]!r} not found.")
    order = [position[sid] for sid in sample_ids]
    return replace(matrix, sample_ids=sample_ids, values=matrix.values[order])


# ---------------------------------------------------------------------------
# Loading / writing
# ---------------------------------------------------------------------------
def load_dataset(directory: str | Path) -> Dataset:
    """Load a dataset directory; rows of every omics are aligned to ``labels.csv``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetFileMissingError(f"Dataset directory not found: {directory}")
    if not (directory / "omics_1.csv").exists() and (directory / "1_tr.csv").exists():
        return _load_mogonet_release(directory)

    meta_path = directory / "meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    omics_names: list[str] = meta.get("omics") or []
    if not omics_names:
        k = 1
        while (directory / f"omics_{k}.csv").exists():
            omics_names.append(f"omics_{k}")
            k += 1
        logger.warning("%s: no omics names in meta.json, using %s", directory, omics_names)

    labels_frame = _read_table(_require(directory / "labels.csv"))
    if labels_frame.shape[1] < 2:
        raise InvalidDatasetError("labels.csv needs columns sample_id,label.")
    sample_ids = tuple(labels_frame.iloc[:, 0].astype(str))
    label_values = _to_float(labels_frame.iloc[:, [1]], directory / "labels.csv")[:, 0]
    if not np.all(label_values == np.round(label_values)):
        raise NonNumericCellError("labels.csv: labels must be integer class indices.")
    classes = label_values.astype(np.int64)
    class_names = tuple(
        meta.get("classes") or [f"class_{c}" for c in range(int(classes.max()) + 1)]
    )

    omics = [
        _align(_read_omics_csv(_require(directory / f"omics_{k}.csv"), name), sample_ids)
        for k, name in enumerate(omics_names, start=1)
    ]
    if len(omics) < 2:
        raise InvalidDatasetError(f"{directory}: need >= 2 omics, found {len(omics)}.")

    dataset = Dataset(
        name=meta.get("name", directory.name),
        omics=omics,
        labels=LabelVector(sample_ids, classes, class_names),
    )
    logger.info(
        "Loaded %s: %d samples, omics %s, %d classes",
        dataset.name,
        dataset.n,
        {m.name: m.d for m in omics},
        dataset.labels.n_classes,
    )
    return dataset


def _load_mogonet_release(directory: Path) -> Dataset:
    """Read the raw MOGONET train/test layout into a single dataset."""
    k = 1
    omics: list[OmicsMatrix] = []
    ids: tuple[str, ...] = ()
    while (directory / f"{k}_tr.csv").exists():
        tr = _to_float(_read_table(directory / f"{k}_tr.csv", header=False), directory)
        te = _to_float(_read_table(_require(directory / f"{k}_te.csv"), header=False), directory)
        names_path = directory / f"{k}_featname.csv"
        if names_path.exists():
            names = tuple(_read_table(names_path, header=False).iloc[:, 0].astype(str))
        else:
            names = tuple(f"f{j}" for j in range(tr.shape[1]))
        ids = tuple(f"tr{i}" for i in range(len(tr))) + tuple(f"te{i}" for i in range(len(te)))
        name = _MOGONET_OMICS[k - 1] if k <= len(_MOGONET_OMICS) else f"omics_{k}"
        omics.append(OmicsMatrix(name, ids, names, np.vstack([tr, te])))
        k += 1
    y_tr = _to_float(_read_table(_require(directory / "labels_tr.csv"), header=False), directory)
    y_te = _to_float(_read_table(_require(directory / "labels_te.csv"), header=False), directory)
    classes = np.concatenate([y_tr[:, 0], y_te[:, 0]]).astype(np.int64)
    if any(m.n != len(classes) for m in omics):
        raise SampleMismatchError(f"{directory}: omics and labels disagree in sample count.")
    if len(omics) < 2:
        raise InvalidDatasetError(f"{directory}: need >= 2 omics, found {len(omics)}.")
    class_names = tuple(f"class_{c}" for c in range(int(classes.max()) + 1))
    return Dataset(directory.name, omics, LabelVector(ids, classes, class_names))


def write_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Write *dataset* in the canonical layout; floats round-trip exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, matrix in enumerate(dataset.omics, start=1):
        frame = pd.DataFrame(matrix.values, columns=list(matrix.feature_names))
        frame.insert(0, "sample_id", list(matrix.sample_ids))
        frame.to_csv(directory / f"omics_{k}.csv", index=False, float_format="%.17g")
    pd.DataFrame(
        {"sample_id": list(dataset.labels.sample_ids), "label": dataset.labels.classes}
    ).to_csv(directory / "labels.csv", index=False)
    meta = {
        "name": dataset.name,
        "omics": dataset.omics_names,
        "classes": list(dataset.labels.class_names),
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    return directory


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------
def synthesize_dataset(
    n: int,
    dims: Sequence[int],
    n_classes: int,
    informativeness: Sequence[float],
    seed: int = 0,
    omics_names: Sequence[str] | None = None,
    name: str = "synthetic",
) -> Dataset:
    """Class-conditional Gaussian omics.

    In omics m, ``round(informativeness[m] * d)`` features (named ``*_sig*``)
    carry class means spread over [-1, 1]; the rest (``*_f*``) are unit noise.
    """
    if n_classes < 2:
        raise InvalidDatasetError("need at least 2 classes.")
    if n < 2 * n_classes:
        raise InvalidDatasetError(f"n={n} must be >= 2*C={2 * n_classes}.")
    if len(dims) != len(informativeness) or not dims:
        raise InvalidDatasetError("dims and informativeness must be non-empty and aligned.")
    if any(d < 1 for d in dims):
        raise InvalidDatasetError(f"feature counts must be >= 1, got {list(dims)}.")
    if any(not 0.0 <= f <= 1.0 for f in informativeness):
        raise InvalidDatasetError("informativeness must lie in [0, 1].")
    names = list(omics_names or [f"omics{m + 1}" for m in range(len(dims))])
    if len(names) != len(dims):
        raise InvalidDatasetError("omics_names and dims differ in length.")

    rng = np.random.default_rng(seed)
    y = rng.permutation(np.arange(n) % n_classes)
    sample_ids = tuple(f"S{i:04d}" for i in range(n))
    levels = np.linspace(-1.0, 1.0, n_classes)

    omics = []
    for omics_name, d, frac in zip(names, dims, informativeness):
        values = rng.standard_normal((n, d))
        informative = set(rng.choice(d, size=int(round(frac * d)), replace=False).tolist())
        for col in sorted(informative):
            values[:, col] += rng.permutation(levels)[y]
        features = tuple(
            f"{omics_name}_sig{j:04d}" if j in informative else f"{omics_name}_f{j:04d}"
            for j in range(d)
        )
        omics.append(OmicsMatrix(omics_name, sample_ids, features, values))

    labels = LabelVector(
        sample_ids, y, tuple(f"class_{c}" for c in range(n_classes))
    )
    return Dataset(name=name, omics=omics, labels=labels)


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------
def standardize(train: OmicsMatrix, apply_to: OmicsMatrix) -> OmicsMatrix:
    """z-score *apply_to* with the per-feature mean/std of *train*."""
    if train.feature_names != apply_to.feature_names:
        raise InvalidDatasetError(
            f"standardize: feature sets of {train.name!r} and {apply_to.name!r} differ."
        )
    scaler = StandardScaler().fit(train.values)
    out = scaler.transform(apply_to.values)
    out[:, np.sqrt(scaler.var_) < _CONSTANT_STD] = 0.0
    return apply_to.with_values(out)


def standardize_dataset(dataset: Dataset, train_indices: NDArray[np.int64]) -> Dataset:
    """Standardise every omics with statistics of the training rows only."""
    omics = []
    for matrix in dataset.omics:
        train = replace(
            matrix,
            sample_ids=tuple(matrix.sample_ids[i] for i in train_indices),
            values=matrix.values[train_indices],
        )
        omics.append(standardize(train, matrix))
    return dataset.with_omics(omics)


def stratified_split(
    labels: LabelVector,
    test_fraction: float = 0.3,
    seed: int = 0,
) -> SplitPlan:
    """Stratified train/test split of sample indices."""
    counts = np.bincount(labels.classes, minlength=labels.n_classes)
    if (counts < 2).any():
        bad = int(np.flatnonzero(counts < 2)[0])
        raise SplitError(
            f"class {labels.class_names[bad]!r} has {counts[bad]} sample(s); need >= 2."
        )
    train, test = train_test_split(
        np.arange(len(labels.classes)),
        test_size=test_fraction,
        random_state=seed,
        stratify=labels.classes,
    )
    for side, idx in (("train", train), ("test", test)):
        present = np.unique(labels.classes[idx])
        if present.size != labels.n_classes:
            raise SplitError(
                f"{side} side misses a class at test_fraction={test_fraction}."
            )
    return SplitPlan(train=np.sort(train), test=np.sort(test), seed=seed)


def apply_missing(matrix: OmicsMatrix, spec: PerturbationSpec) -> OmicsMatrix:
    """Zero a uniformly random ``spec.rate`` fraction of the targeted cells."""
    rows = np.arange(matrix.n) if spec.rows is None else np.asarray(spec.rows, dtype=np.intp)
    n_cells = rows.size * matrix.d
    k = int(round(spec.rate * n_cells))
    if k == 0:
        return matrix
    rng = np.random.default_rng(spec.seed)
    flat = rng.choice(n_cells, size=k, replace=False)
    values = matrix.values.copy()
    values[rows[flat // matrix.d], flat % matrix.d] = 0.0
    return matrix.with_values(values)
