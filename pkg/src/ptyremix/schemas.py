import json
import math
from pathlib import Path
from typing import Any, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ptyremix.exceptions import ConfigError, StorageError
from ptyremix.models import ScanOrder

SEED_MAX = 2**64 - 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProbeSpec(StrictModel):
    size: int = Field(60, ge=1)
    diameter: float = Field(60.0, gt=0)
    profile: Literal["tophat", "gaussian_edge"] = "tophat"
    sigma: float | None = Field(None, gt=0)
    amplitude: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_fits(self):
        if self.diameter > self.size:
            raise ValueError(f"diameter {self.diameter} exceeds probe size {self.size}")
        if self.profile == "gaussian_edge" and self.sigma is None:
            raise ValueError("gaussian_edge profile needs sigma")
        return self


class NoiseSpec(StrictModel):
    photon_scale: float = Field(..., gt=0)
    seed: int = Field(0, ge=0, le=SEED_MAX)


class EpieOptions(StrictModel):
    sweeps: int = Field(2000, ge=1)
    order: ScanOrder = ScanOrder.random_shuffle
    seed: int = Field(0, ge=0, le=SEED_MAX)
    alpha_real: float = Field(1.0, ge=0)
    alpha_sim: float = Field(1.0, ge=0)
    zero_guard: float = Field(1e-12, gt=0)
    stop_tol: float = Field(0.0, ge=0)


def weighted_alphas(alpha_base: float, weight: float) -> tuple[float, float]:
    """
    Step sizes (real, simulated) in the ratio 1 : 1/w, scaled so neither exceeds
    `alpha_base`: w >= 1 gives (alpha, alpha / w), w < 1 gives (alpha * w, alpha).
    """
    if weight >= 1.0:
        return alpha_base, alpha_base / weight
    return alpha_base * weight, alpha_base


class RemixConfig(StrictModel):
    oversample: int = Field(3, ge=1)
    weight: float = Field(20.0, gt=0)
    w_decay: float = Field(1.0, gt=0, le=1)
    outer_iters: int = Field(1, ge=1)
    epie_sweeps: int = Field(2000, ge=1)
    epie_order: ScanOrder = ScanOrder.random_shuffle
    seed: int = Field(0, ge=0, le=SEED_MAX)
    zero_guard: float = Field(1e-12, gt=0)
    alpha_base: float = Field(1.0, gt=0)
    stop_tol: float = Field(0.0, ge=0)

    def epie_options(self, weight: float | None = None, seed: int | None = None) -> EpieOptions:
        """Weighted ePIE options with step sizes from `weighted_alphas`."""
        alpha_real, alpha_sim = weighted_alphas(self.alpha_base, self.weight if weight is None else weight)
        return EpieOptions(
            sweeps=self.epie_sweeps,
            order=self.epie_order,
            seed=self.seed if seed is None else seed,
            alpha_real=alpha_real,
            alpha_sim=alpha_sim,
            zero_guard=self.zero_guard,
            stop_tol=self.stop_tol,
        )


class RunConfig(StrictModel):
    init: Path
    probe: Path
    output: Path
    real: Path | None = None
    truth: Path | None = None
    report: Path | None = None
    step: int | None = Field(None, ge=1)
    phase_max: float = Field(1.0, gt=0)
    remix: RemixConfig = Field(default_factory=RemixConfig)
    noise: NoiseSpec | None = None


class MetricReport(StrictModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    aligned_mse: float
    tv_value: float = Field(..., serialization_alias="tv", validation_alias="tv")
    poisson_nll: float
    l1_misfit: float
    coverage_fraction: float = Field(..., ge=0, le=1)

    @field_validator("aligned_mse", "tv_value", "poisson_nll", "l1_misfit")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("metric is not finite")
        return value

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True))


class AuditStep(BaseModel):
    name: str
    started_at: str
    ended_at: str | None
    duration_s: float | None = None
    notes: str | None = None


class AuditTrail(BaseModel):
    steps: list[AuditStep] = Field(default_factory=list)
    errors: list[str] = Field(default_factory=list)


class RemixRoundReport(BaseModel):
    round: int
    weight: float
    sweeps_run: int
    final_update_norm: float
    real_misfit: float
    simulated_misfit: float
    aligned_mse: float | None = None
    duration_s: float


class RemixReport(BaseModel):
    rounds: list[RemixRoundReport] = Field(default_factory=list)
    audit: AuditTrail = Field(default_factory=AuditTrail)
    output: str | None = None


M = TypeVar("M", bound=BaseModel)


def parse_model(model: type[M], data: dict[str, Any]) -> M:
    """Validate a document, turning pydantic errors into ConfigError."""
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid {model.__name__}: {exc}") from exc


def load_run_config(path: Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    config = parse_model(RunConfig, data)

    # relative paths are relative to the config file, not the working directory
    base = Path(path).resolve().parent
    updates = {
        name: base / value
        for name in ("init", "probe", "output", "real", "truth", "report")
        if (value := getattr(config, name)) is not None and not value.is_absolute()
    }
    return config.model_copy(update=updates)
