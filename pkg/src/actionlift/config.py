"""Configuration management: environment variables (Pydantic Settings) + YAML documents.

Env vars handle deployment concerns (defaults file location, log level, harness
concurrency). config/defaults.yml holds the vehicle presets and study defaults
(version-controlled). Job documents passed on the command line are JSON or YAML;
both are read with yaml.safe_load and validated by the models below.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from actionlift.core.errors import ConfigError
from actionlift.core.types import InitialState, ModelKind, Scheme

# ---------------------------------------------------------------------------
# Lifting parameters
# ---------------------------------------------------------------------------


class VehicleParams(BaseModel):
    """Physical parameters shared by every grid point of a study."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    wheelbase: float = 2.9
    delta_max: float = 0.6
    a_max: float = 1.0
    kappa_max: float = 0.4
    sharpness_max: float = 0.1


class LiftConfig(BaseModel):
    """Physical and numerical parameters of one lifting operator.

    Units: dt in s, wheelbase in m, delta_max in rad, a_max in m/s^2,
    kappa_max in 1/m, sharpness_max in 1/m^2. Bounds are enforced by
    :func:`validate_config`, not at construction, so that a rejected document
    reports exactly one named violation.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float
    wheelbase: float
    delta_max: float
    a_max: float
    kappa_max: float
    sharpness_max: float
    n_int: int
    scheme: Scheme = Scheme.EULER
    model: ModelKind = ModelKind.KBM

    @property
    def lateral_bound(self) -> float:
        """Saturation of the lateral channel: steering for KBM, sharpness for CCPP."""
        return self.sharpness_max if self.model is ModelKind.CCPP else self.delta_max

    def replace(self, **changes: Any) -> LiftConfig:
        """Copy with ``changes`` applied and re-validated by pydantic."""
        return LiftConfig.model_validate({**self.model_dump(), **changes})

    @classmethod
    def from_vehicle(
        cls,
        vehicle: VehicleParams,
        *,
        dt: float,
        n_int: int,
        scheme: Scheme,
        model: ModelKind,
    ) -> LiftConfig:
        return cls(dt=dt, n_int=n_int, scheme=scheme, model=model, **vehicle.model_dump())


def validate_config(cfg: LiftConfig) -> LiftConfig:
    """Check every physical bound of ``cfg`` in field order.

    Args:
        cfg: Configuration to check.

    Returns:
        ``cfg`` unchanged when all bounds hold.

    Raises:
        ConfigError: Naming the first violated bound.
    """
    positive = (
        ("dt", cfg.dt, "nonpositive interval"),
        ("wheelbase", cfg.wheelbase, "nonpositive wheelbase"),
    )
    for name, value, reason in positive:
        if not math.isfinite(value):
            raise ConfigError(name, f"non-finite {name}: got {value}")
        if value <= 0.0:
            raise ConfigError(name, f"{reason}: {name} must be > 0, got {value}")

    if not math.isfinite(cfg.delta_max) or not 0.0 < cfg.delta_max < math.pi / 2:
        raise ConfigError(
            "delta_max", f"steering bound outside (0, pi/2): got {cfg.delta_max}"
        )

    bounds = (
        ("a_max", cfg.a_max, "nonpositive longitudinal gain"),
        ("kappa_max", cfg.kappa_max, "nonpositive curvature bound"),
        ("sharpness_max", cfg.sharpness_max, "nonpositive sharpness bound"),
    )
    for name, value, reason in bounds:
        if not math.isfinite(value):
            raise ConfigError(name, f"non-finite {name}: got {value}")
        if value <= 0.0:
            raise ConfigError(name, f"{reason}: {name} must be > 0, got {value}")

    if cfg.n_int < 1:
        raise ConfigError("n_int", f"zero substeps: n_int must be >= 1, got {cfg.n_int}")
    return cfg


class InitialStateConfig(BaseModel):
    """Initial speed (m/s) and curvature (1/m) of a lift job."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    v0: float = 0.0
    kappa0: float = 0.0

    def to_initial_state(self) -> InitialState:
        return InitialState(v0=self.v0, kappa0=self.kappa0)


class LiftJob(BaseModel):
    """Document consumed by ``actionlift lift`` and ``actionlift gradcheck``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lift: LiftConfig
    initial_state: InitialStateConfig = InitialStateConfig()


# ---------------------------------------------------------------------------
# Study and training documents
# ---------------------------------------------------------------------------


class SweepSpec(BaseModel):
    """Grid of the numerical-error study."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    horizons: list[int] = Field(min_length=1)
    intervals: list[float] = Field(min_length=1)
    substeps: list[int] = Field(min_length=1)
    schemes: list[Scheme] = Field(min_length=1)
    models: list[ModelKind] = Field(min_length=1)
    corpus_size: int = Field(ge=1)
    rng_seed: int = 0
    refine: int = Field(default=256, ge=64)
    v0_max: float = Field(default=15.0, ge=0.0)
    vehicle: VehicleParams = VehicleParams()

    @field_validator("horizons", "substeps")
    @classmethod
    def validate_counts(cls, v: list[int]) -> list[int]:
        if any(n < 1 for n in v):
            msg = f"grid counts must be >= 1, got {v}"
            raise ValueError(msg)
        return v

    @field_validator("intervals")
    @classmethod
    def validate_intervals(cls, v: list[float]) -> list[float]:
        if any(not math.isfinite(dt) or dt <= 0.0 for dt in v):
            msg = f"intervals must be finite and > 0, got {v}"
            raise ValueError(msg)
        return v

    @field_validator("models")
    @classmethod
    def validate_models(cls, v: list[ModelKind]) -> list[ModelKind]:
        if ModelKind.MLP in v:
            msg = "the numerical study covers analytic models only (kbm, ccpp)"
            raise ValueError(msg)
        return v


class GradCheckConfig(BaseModel):
    """Random-case settings of the gradient verifier."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cases: int = Field(default=100, ge=1)
    fd_step: float = Field(default=1e-5, gt=0.0)
    tolerance: float = Field(default=1e-5, gt=0.0)
    horizon: int = Field(default=8, ge=1)
    v0_max: float = Field(default=15.0, ge=0.0)


class ExpertConfig(BaseModel):
    """Hidden expert that turns synthetic observations into smooth controls."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    v0_min: float = Field(default=2.0, ge=0.0)
    v0_max: float = Field(default=12.0, ge=0.0)
    max_target_curvature: float = Field(default=0.15, ge=0.0)
    max_speed_delta: float = Field(default=3.0, ge=0.0)
    # Fraction of the control bound the expert may use
    control_fraction: float = Field(default=0.8, gt=0.0, lt=1.0)
    # Fraction of the horizon during which the CCPP expert ramps curvature
    ramp_fraction: float = Field(default=0.5, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def validate_speed_range(self) -> ExpertConfig:
        if self.v0_min > self.v0_max:
            msg = f"v0_min ({self.v0_min}) exceeds v0_max ({self.v0_max})"
            raise ValueError(msg)
        return self


class TrainConfig(BaseModel):
    """Policy training demo settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lift: LiftConfig
    horizon: int = Field(default=8, ge=1)
    dataset_size: int = Field(default=32, ge=1)
    batch_size: int = Field(default=32, ge=1)
    steps: int = Field(default=500, ge=0)
    lr: float = Field(default=0.02, ge=0.0)
    # Learning rate at the last step, as a fraction of lr
    lr_final_fraction: float = Field(default=0.1, gt=0.0, le=1.0)
    max_grad_norm: float | None = Field(default=5.0, gt=0.0)
    hidden: int = Field(default=32, ge=1)
    seed: int = 0
    oracle_refine: int = Field(default=128, ge=64)
    expert: ExpertConfig = ExpertConfig()


class MlpFitConfig(BaseModel):
    """Settings of the learned MLP lifting baseline."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lift: LiftConfig
    horizon: int = Field(default=8, ge=1)
    train_size: int = Field(default=8192, ge=1)
    heldout_size: int = Field(default=1024, ge=1)
    epochs: int = Field(default=300, ge=1)
    batch_size: int = Field(default=256, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    hidden: int = Field(default=256, ge=1)
    action_scale: float = Field(default=0.5, gt=0.0)
    v0_max: float = Field(default=15.0, ge=0.0)
    seed: int = 0
    patience: int = Field(default=10, ge=1)


class DefaultsConfig(BaseModel):
    """Complete parsed defaults.yml structure."""

    presets: dict[ModelKind, LiftConfig]
    gradcheck: GradCheckConfig
    sweep: SweepSpec
    train: TrainConfig
    mlp_fit: MlpFitConfig

    def preset(self, model: ModelKind, scheme: Scheme | None = None) -> LiftConfig:
        """Vehicle preset for ``model``, optionally with ``scheme`` swapped in."""
        if model not in self.presets:
            msg = f"no preset for model '{model.value}'"
            raise ConfigError("model", msg)
        cfg = self.presets[model]
        return cfg if scheme is None else cfg.replace(scheme=scheme)


def load_document(path: str | Path) -> dict[str, Any]:
    """Read a JSON or YAML mapping from ``path``."""
    source = Path(path)
    if not source.exists():
        msg = f"Config file not found: {source}"
        raise FileNotFoundError(msg)
    with open(source, encoding="utf-8") as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        msg = f"{source} must contain a mapping at the top level"
        raise ConfigError("<document>", msg)
    return raw


def load_lift_job(path: str | Path) -> LiftJob:
    """Parse and validate a lift job document."""
    job = LiftJob.model_validate(load_document(path))
    validate_config(job.lift)
    return job


# ---------------------------------------------------------------------------
# Environment settings (Pydantic Settings)
# ---------------------------------------------------------------------------

# Default path to defaults.yml relative to project root
_DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent.parent / "config" / "defaults.yml"


class Settings(BaseSettings):
    """Application settings loaded from ACTIONLIFT_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="ACTIONLIFT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    config_path: str = str(_DEFAULT_CONFIG_PATH)
    log_level: str = "INFO"
    # Maximum grid groups evaluated concurrently by the harness
    harness_concurrency: int = Field(default=4, ge=1)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in logging.getLevelNamesMapping():
            msg = f"LOG_LEVEL must be a logging level name, got '{v}'"
            raise ValueError(msg)
        return level

    def load_defaults(self) -> DefaultsConfig:
        """Load and parse config/defaults.yml into typed models."""
        defaults = DefaultsConfig.model_validate(load_document(self.config_path))
        for cfg in defaults.presets.values():
            validate_config(cfg)
        return defaults


# Module-level singletons for convenience
_settings: Settings | None = None
_defaults: DefaultsConfig | None = None


def get_settings() -> Settings:
    """Get or create the global Settings instance."""
    global _settings  # noqa: PLW0603
    if _settings is None:
        _settings = Settings()
    return _settings


def get_defaults() -> DefaultsConfig:
    """Get or create the global DefaultsConfig instance."""
    global _defaults  # noqa: PLW0603
    if _defaults is None:
        _defaults = get_settings().load_defaults()
    return _defaults


def reset_config() -> None:
    """Reset cached config singletons. Useful for testing."""
    global _settings, _defaults  # noqa: PLW0603
    _settings = None
    _defaults = None
