"""
Experiment configuration for the command-line pages.

Configs are TOML files validated by pydantic models that reject unknown keys.
Defaults for every command live in ``data/config/<command>.toml``; a
``manifest.json`` written by an earlier run is accepted as well and replays
that run's configuration.
"""

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator

from backend.expressivity.models import Activation, ModelSkeleton
from backend.expressivity.numerics import Box
from backend.expressivity.training import DatasetKind, TrainConfig
from utils.config.env_loader import get_project_root
from utils.core.exceptions import ConfigurationError
from utils.core.logging import get_project_logger

logger = get_project_logger(__name__)

ConfigT = TypeVar("ConfigT", bound="ExperimentConfig")


class DomainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lo: List[float] = Field(..., min_length=1)
    hi: List[float] = Field(..., min_length=1)
    resolution: Optional[int] = Field(None, ge=2, description="Points per axis, defaults by dimension")

    def box(self) -> Box:
        return Box(self.lo, self.hi)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, description="Root seed of the run")
    out: Optional[Path] = Field(None, description="Artifact directory")


class GradcheckConfig(ExperimentConfig):
    cases: int = Field(1000, ge=0)
    max_n_in: int = Field(4, ge=1)
    max_n_hid: int = Field(4, ge=1)
    max_depth: int = Field(5, ge=0)
    activations: List[Activation] = Field(default_factory=lambda: [Activation.TANH, Activation.SIGMOID])
    weight_range: float = Field(2.0, gt=0)
    fd_step: float = Field(1e-5, gt=0)
    tolerance: float = Field(1e-6, gt=0)


class RegimeConfig(ExperimentConfig):
    model: Optional[Path] = Field(None, description="Model JSON file")
    domain: Optional[DomainConfig] = Field(None, description="Defaults to [-1, 1]^n_in")
    search: bool = Field(False, description="Cross-check the verdict with a critical-point search")
    search_seeds: int = Field(8, ge=1)


class BoundsConfig(ExperimentConfig):
    kind: Literal["euler", "mlp"] = "euler"
    instances: int = Field(50, ge=0, description="Random specs/models in the sweep")
    n_in: int = Field(1, ge=1)
    n_hid: int = Field(1, ge=1)
    depths: List[int] = Field(default_factory=lambda: [5, 10, 20, 40])
    horizon_T: float = Field(1.0, gt=0)
    weight_bound: float = Field(1.0, gt=0)
    eps_values: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.01])
    depth: int = Field(3, ge=0, description="Depth of the random models in an mlp sweep")
    max_depth: Optional[int] = Field(None, ge=1, description="Draw each model's depth from 1..max_depth instead")
    family: Literal["drift", "uniform"] = Field(
        "drift", description="mlp models: bias-dominated drift family or U(-weight_range, weight_range) weights")
    delta: float = Field(1.0, ge=0)
    weight_range: float = Field(1.0, gt=0)
    crossings: bool = Field(True, description="Check level crossings against the MLP limit (1-D and 2-D only)")
    max_eps_spread: float = Field(0.15, ge=0, description="Largest relative spread of err/eps per model")
    order_ratio_range: Tuple[float, float] = Field((1.6, 2.4), description="Accepted Euler halving ratios")
    min_order_fraction: float = Field(0.9, ge=0, le=1,
                                      description="Share of specs whose two finest ratios must fall in range")
    domain: Optional[DomainConfig] = None

    @field_validator("depths")
    @classmethod
    def _positive_depths(cls, depths):
        if any(L < 1 for L in depths):
            raise ValueError("Euler depths must be >= 1")
        return depths

    @field_validator("eps_values")
    @classmethod
    def _eps_in_open_unit_interval(cls, eps_values):
        bad = [eps for eps in eps_values if not 0.0 < eps < 1.0]
        if bad:
            raise ValueError(f"mlp sweep needs 0 < eps < 1, got {bad}")
        return eps_values

    @field_validator("order_ratio_range")
    @classmethod
    def _ordered_range(cls, bounds):
        if not 0 < bounds[0] < bounds[1]:
            raise ValueError(f"order_ratio_range needs 0 < lo < hi, got {bounds}")
        return bounds


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DatasetKind = DatasetKind.CIRCLE_2D
    size: int = Field(1400, ge=1)
    band: float = Field(0.05, ge=0)
    center: Optional[List[float]] = None


class RunCriterion(BaseModel):
    """
    Per-run property a preset must show in at least ``min_runs`` runs.

    tunnel:
        every decision component reaches the domain boundary
    bounded_accurate:
        train accuracy >= ``min_accuracy`` and a bounded sub-level component
    xor_signature:
        a super-level component through the centre joins the lower and upper edges (2-D)
    monotone:
        the input derivative keeps one sign on a 1001-point grid (1-D)
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["tunnel", "bounded_accurate", "xor_signature", "monotone"]
    min_runs: int = Field(..., ge=0)
    min_accuracy: float = Field(0.95, ge=0, le=1)


class TrainRunConfig(ExperimentConfig):
    runs: int = Field(10, ge=0, description="Independent training runs")
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    skeleton: ModelSkeleton
    train: TrainConfig = Field(default_factory=TrainConfig)
    figure_resolution: int = Field(201, ge=2)
    criterion: Optional[RunCriterion] = None


class LevelsetConfig(ExperimentConfig):
    model: Optional[Path] = None
    level: float = 0.5
    domain: Optional[DomainConfig] = None
    reference: Optional[Path] = Field(None, description="Reference model without interior critical points")
    mu: Optional[float] = Field(None, ge=0, description="Sup distance to the reference, measured if unset")


COMMAND_CONFIGS = {
    "gradcheck": GradcheckConfig,
    "regime": RegimeConfig,
    "bounds": BoundsConfig,
    "train": TrainRunConfig,
    "levelset": LevelsetConfig,
}


def default_config_path(command: str) -> Path:
    return get_project_root() / "data" / "config" / f"{command}.toml"


def _read_raw(path: Path) -> dict:
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}", error_code="CONFIG_NOT_FOUND")
    try:
        if path.suffix == ".json":
            raw = json.loads(path.read_text(encoding="utf-8"))
            # a manifest carries the validated config of its run
            return raw.get("config", raw)
        with path.open("rb") as f:
            return tomllib.load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot parse {path}: {e}", error_code="BAD_CONFIG_SYNTAX")


def load_config(
    command: str,
    path: Optional[Path] = None,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    **overrides,
) -> ExperimentConfig:
    """
    Load and validate the configuration of ``command``.

    Args:
        command (str): CLI command name
        path (Optional[Path]): Config file, defaults to ``data/config/<command>.toml``
        seed (Optional[int]): ``--seed`` override
        out (Optional[Path]): ``--out`` override
        **overrides: Further top-level keys set from command-line flags (``None`` is ignored)

    Raises:
        ConfigurationError: On unknown commands, unreadable files, unknown keys or invalid values
    """
    if command not in COMMAND_CONFIGS:
        raise ConfigurationError(f"Unknown command '{command}'", error_code="UNKNOWN_COMMAND")
    cls: Type[ExperimentConfig] = COMMAND_CONFIGS[command]
    if path is None:
        path = default_config_path(command)
        raw = _read_raw(path) if path.exists() else {}
        if not raw:
            logger.info(f"No default config for {command}, using built-in defaults")
    else:
        raw = _read_raw(Path(path))

    updates = {"seed": seed, "out": out, **overrides}
    raw = {**raw, **{k: v for k, v in updates.items() if v is not None}}
    try:
        return cls.model_validate(raw)
    except PydanticValidationError as e:
        raise ConfigurationError(
            f"Invalid {command} config: {e.error_count()} error(s)",
            error_code="INVALID_CONFIG",
            details={"errors": [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]},
        )


def config_hash(config: BaseModel) -> str:
    """sha256 of the canonical JSON form, ``out`` excluded so relocated runs hash alike."""
    payload = config.model_dump(mode="json", exclude={"out"})
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
