"""
Run configuration for the wildfire spread pipeline.

Values come from (lowest to highest precedence) the defaults below, a flat
KEY=VALUE config file, WILDFIRE_* environment variables and CLI flags.
"""
import json
import logging
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseSettings, ValidationError, root_validator, validator

from errors import ConfigError

logger = logging.getLogger(__name__)

ENV_PREFIX = "WILDFIRE_"
RNN_HIDDEN = (128, 256)
_LIST_FIELDS = {"models"}


class Task(str, Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


class ModelKind(str, Enum):
    LR = "LR"
    LSTM = "LSTM"
    GRU = "GRU"


class RunConfig(BaseSettings):
    """
    Every tunable of the pipeline. Defaults are the standard protocol: 375 m,
    6 h, K=8, 30% test, 10 folds, 10 repeats, epochs 20/300, hidden [128, 256].
    """

    # paths
    detections_path: Optional[str] = None
    elevation_path: Optional[str] = None
    work_dir: str = "work"
    out_dir: str = "out"

    # ingest
    bbox_lat_min: float = -35.0
    bbox_lat_max: float = -22.0
    bbox_lon_min: float = 16.0
    bbox_lon_max: float = 33.0
    delimiter: str = ","
    column_latitude: str = "latitude"
    column_longitude: str = "longitude"
    column_acq_date: str = "acq_date"
    column_acq_time: str = "acq_time"
    column_frp: str = "frp"
    column_elevation: str = "elevation"
    elevation_decimals: int = 3
    strict_parse: bool = True

    # firegraph
    s_r: float = 375.0
    t_r: float = 21600.0
    k: int = 8

    # sequence
    task: Task = Task.BINARY
    lw_min: int = 2
    lw_max: int = 8
    balance_binary: bool = False

    # neuralnet
    models: List[ModelKind] = [ModelKind.LR, ModelKind.LSTM, ModelKind.GRU]
    hidden_1: int = RNN_HIDDEN[0]
    hidden_2: int = RNN_HIDDEN[1]
    output_activation: str = "relu"
    dropout: float = 0.2
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs_lr: int = 300
    epochs_rnn: int = 20

    # experiment
    test_fraction: float = 0.30
    folds: int = 10
    repeats: int = 10
    seed: int = 0
    vary_seeds: bool = True
    n_jobs: int = 1

    class Config:
        env_prefix = ENV_PREFIX
        case_sensitive = False
        use_enum_values = False

        @classmethod
        def parse_env_var(cls, field_name: str, raw_val: str) -> Any:
            if field_name in _LIST_FIELDS:
                return [item.strip() for item in raw_val.split(",") if item.strip()]
            return cls.json_loads(raw_val)

    @validator("lw_min", "lw_max")
    def _lw_in_range(cls, value: int) -> int:
        if not 2 <= value <= 8:
            raise ValueError("l_w must lie in [2, 8]")
        return value

    @validator("test_fraction")
    def _fraction_open_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        return value

    @validator("folds")
    def _folds_at_least_two(cls, value: int) -> int:
        if value < 2:
            raise ValueError("folds must be >= 2")
        return value

    @validator("repeats", "k", "batch_size", "epochs_lr", "epochs_rnn", "n_jobs")
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("hidden_1", "hidden_2")
    def _fixed_recurrent_widths(cls, value: int, field) -> int:
        expected = RNN_HIDDEN[0] if field.name == "hidden_1" else RNN_HIDDEN[1]
        if value != expected:
            raise ValueError(f"recurrent layer widths are fixed at {RNN_HIDDEN}; got {value}")
        return value

    @validator("s_r", "t_r", "learning_rate", "epsilon")
    def _strictly_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be > 0")
        return value

    @validator("dropout")
    def _dropout_rate(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        return value

    @validator("rho")
    def _rho_rate(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        return value

    @validator("output_activation")
    def _known_activation(cls, value: str) -> str:
        if value not in ("tanh", "relu"):
            raise ValueError("output_activation must be 'tanh' or 'relu'")
        return value

    @validator("models")
    def _models_present(cls, value: List[ModelKind]) -> List[ModelKind]:
        if not value:
            raise ValueError("at least one model kind is required")
        return value

    @root_validator(skip_on_failure=True)
    def _ordered_ranges(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["lw_min"] > values["lw_max"]:
            raise ValueError("lw_min must not exceed lw_max")
        if values["bbox_lat_min"] >= values["bbox_lat_max"]:
            raise ValueError("bounding box needs lat_min < lat_max")
        if values["bbox_lon_min"] >= values["bbox_lon_max"]:
            raise ValueError("bounding box needs lon_min < lon_max")
        return values

    @property
    def lw_values(self) -> List[int]:
        return list(range(self.lw_min, self.lw_max + 1))

    @property
    def column_map(self) -> Dict[str, str]:
        """Logical column name -> header name in the detection file."""
        return {
            "latitude": self.column_latitude,
            "longitude": self.column_longitude,
            "acq_date": self.column_acq_date,
            "acq_time": self.column_acq_time,
            "frp": self.column_frp,
            "elevation": self.column_elevation,
        }

    def to_manifest(self) -> str:
        """Resolved configuration as stable, sorted JSON."""
        return json.dumps(json.loads(self.json()), sort_keys=True, indent=2)


def load_run_config(config_path: Optional[str] = None, **overrides: Any) -> RunConfig:
    """
    Build a RunConfig from an optional config file plus explicit overrides.

    Args:
        config_path: Flat KEY=VALUE file (WILDFIRE_ prefixed keys), optional
        **overrides: Values from CLI flags; None values are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: if the file is missing or any value fails validation
    """
    if config_path is not None and not os.path.isfile(config_path):
        raise ConfigError(f"config file not found: {config_path}")

    explicit = {key: value for key, value in overrides.items() if value is not None}
    try:
        config = RunConfig(_env_file=config_path, **explicit)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    logger.debug("Resolved configuration: %s", config.to_manifest())
    return config
