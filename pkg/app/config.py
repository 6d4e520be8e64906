"""
Configuration — runtime settings and training-config files.

Runtime values are loaded from environment variables (or a `.env` file at
the project root).  Training hyperparameters live in ``TrainConfig``
(see ``app.schemas``) and are read from flat ``key = value`` files.

Attributes
----------
THREADS : int | None
    Cap on BLAS/OpenMP kernel threads (``MVKT_THREADS``); ``None`` = no cap.
LOG_LEVEL : str
    Root logging level for the CLI and the API (``MVKT_LOG_LEVEL``).
OUT_DIR : str
    Default output directory (``MVKT_OUT_DIR``).
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from app.errors import ConfigError
from app.schemas import TrainConfig

# ---------------------------------------------------------------------------
# Load .env from project root
# ---------------------------------------------------------------------------
_ENV_PATH = Path(__file__).resolve().parent.parent / ".env"
load_dotenv(_ENV_PATH)


def _env_int(name: str) -> int | None:
    """Integer environment variable, ``None`` when unset or empty."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}.") from exc
    if value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}.")
    return value


# ---------------------------------------------------------------------------
# Runtime settings
# ---------------------------------------------------------------------------
THREADS: int | None = _env_int("MVKT_THREADS")
LOG_LEVEL: str = os.getenv("MVKT_LOG_LEVEL", "INFO").upper()
OUT_DIR: str = os.getenv("MVKT_OUT_DIR", "out")


def configure_logging(level: str | None = None) -> None:
    """Configure the root logger once for CLI / API entry points."""
    logging.basicConfig(
        level=getattr(logging, level or LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ---------------------------------------------------------------------------
# Training-config files
# ---------------------------------------------------------------------------
def load_train_config(
    path: str | Path | None = None,
    **overrides: object,
) -> TrainConfig:
    """Build a ``TrainConfig`` from a ``key = value`` file plus overrides.

    Keys mirror ``TrainConfig`` field names.  Empty values are ignored so a
    file can list a key without overriding its default.
    """
    values: dict[str, object] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        for key, raw in dotenv_values(path).items():
            if raw is None or raw.strip() == "":
                continue
            values[key.strip()] = raw.strip()
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.model_validate(values)
    except ValidationError as exc:
        raise ConfigError(f"Invalid training config: {exc}") from exc


def dump_train_config(config: TrainConfig, path: str | Path) -> None:
    """Write *config* in the flat ``key = value`` format."""
    lines = []
    for key, value in config.model_dump(mode="json").items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
