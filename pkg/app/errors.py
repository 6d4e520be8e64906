"""
Exception hierarchy and CLI exit-code mapping.

Every error raised on purpose by the package derives from
``MVKTransError``.  The three families map onto the CLI exit codes:

* ``ConfigError`` / ``UsageError``  -> 1
* ``DataError`` and subclasses      -> 2
* ``NumericalError`` and subclasses -> 3
"""

from __future__ import annotations


class MVKTransError(Exception):
    """Base class for all package errors."""

    exit_code: int = 3


# ---------------------------------------------------------------------------
# Usage / configuration
# ---------------------------------------------------------------------------
class UsageError(MVKTransError, ValueError):
    """Bad command-line usage."""

    exit_code = 1


class ConfigError(MVKTransError, ValueError):
    """Invalid configuration key or value."""

    exit_code = 1


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------
class DataError(MVKTransError):
    """Anything wrong with the input data or files on disk."""

    exit_code = 2


class DatasetFileMissingError(DataError, FileNotFoundError):
    """A required dataset file does not exist."""


class RaggedRowError(DataError, ValueError):
    """A CSV row has a different number of fields than the header."""


class NonNumericCellError(DataError, ValueError):
    """A CSV cell could not be parsed as a finite float."""


class SampleMismatchError(DataError, ValueError):
    """Sample ids or counts disagree across the files of one dataset."""


class InvalidDatasetError(DataError, ValueError):
    """Structurally invalid dataset (sizes, classes, omics count)."""


class ZeroSampleError(DataError, ValueError):
    """A sample row is all zeros, so its cosine similarity is undefined."""

    def __init__(self, sample_id: str) -> None:
        super().__init__(f"Sample {sample_id!r} has an all-zero feature row.")
        self.sample_id = sample_id


class SplitError(DataError, ValueError):
    """A stratified split cannot be produced for the given labels."""


class CheckpointError(DataError):
    """Checkpoint file is malformed or incompatible with the model."""


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------
class NumericalError(MVKTransError):
    """Numerical failure or ill-posed computation."""

    exit_code = 3


class DimensionError(NumericalError, ValueError):
    """Operand shapes are incompatible."""


class DegenerateRowError(NumericalError, ValueError):
    """A masked softmax row has no unmasked entry."""


class UndefinedSimilarityError(NumericalError, ValueError):
    """Cosine similarity requested for a zero vector."""


class UndefinedMetricError(NumericalError, ValueError):
    """A metric is undefined for the given labels (e.g. AUC with one class)."""


class NonFiniteLossError(NumericalError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, phase: str, epoch: int | None, value: float) -> None:
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"Non-finite {phase} loss ({value!r}){where}.")
        self.phase = phase
        self.epoch = epoch
        self.value = value
