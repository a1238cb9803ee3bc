"""Configuration objects for mborel-amo."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .arith import DiophantineParams
from .exceptions import ConfigError


@dataclass(slots=True)
class NumericsConfig:
    """Tolerances and work-splitting knobs shared by the numerical kernels."""

    renorm_interval: int = 64
    bisection_tol: float = 1e-12
    cluster_gap_rel: float = 1e-10
    inverse_iterations: int = 3
    chunk_size: int = 256
    workers: int = 1
    zero_tol: float = 1e-13
    borel_log_threshold: float = 1e6
    truncation_tol: float = 1e-6
    ess_quantile: float = 0.95
    spacing_tol: float = 1e-9
    uniformity_grid_factor: int = 8
    omega_rtol: float = 1e-3


class FrequencySpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["expand", "synthesize"] = "synthesize"
    alpha: str | None = None
    beta_target: float = Field(default=1.0, ge=0.0)
    q_cap: int = Field(default=10**10, ge=2)
    n_max: int = Field(default=40, ge=1)
    dps: int = Field(default=200, ge=30)
    tail_start: int = Field(default=1, ge=0)

    @model_validator(mode="after")
    def _alpha_required_for_expand(self) -> FrequencySpec:
        if self.mode == "expand" and not self.alpha:
            raise ValueError("frequency.alpha is required when mode is 'expand'")
        return self


class ScaleGridSpec(BaseModel):
    """Geometric grid ``eps_k = base**(-k)`` for ``k_min <= k <= k_max``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    base: float = Field(default=2.0, gt=1.0)
    k_min: int = 2
    k_max: int = 10

    @model_validator(mode="after")
    def _at_least_four_scales(self) -> ScaleGridSpec:
        if self.k_max - self.k_min + 1 < 4:
            raise ValueError("scale grid needs at least 4 scales")
        return self


class SlackSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dimension: float = Field(default=0.15, ge=0.0)
    decay: float = Field(default=0.1, ge=0.0)
    inequality: float = Field(default=0.1, ge=0.0)


class MBorelSuiteSpec(BaseModel):
    """Synthetic measures used by the m-Borel verification run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cantor_depth: int = Field(default=12, ge=1, le=20)
    biased_left_weight: float = Field(default=0.3, gt=0.0, lt=1.0)
    lebesgue_atoms: int = Field(default=100_000, ge=10)
    grid: ScaleGridSpec = ScaleGridSpec(base=3.0, k_min=3, k_max=9)


class LocalizationSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    coupling_lambda: float = Field(default=math.exp(1.5), gt=1.0)
    t1: float | None = None
    t2: float | None = None
    sigma: float = Field(default=0.01, gt=0.0)
    n_eigenvectors: int = Field(default=5, ge=1)
    min_pass_fraction: float = Field(default=0.8, ge=0.0, le=1.0)


class TransitionSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    boundary_t_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)
    boundary_energies: int = Field(default=20, ge=1)
    boundary_eps: tuple[float, ...] = (1e-2, 3e-3, 1e-3)
    boundary_min_pass_fraction: float = Field(default=0.7, ge=0.0, le=1.0)
    lyapunov_steps: int = Field(default=100_000, ge=1000)


class ExperimentConfig(BaseModel):
    """Complete description of one harness run, loaded from JSON."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frequency: FrequencySpec = FrequencySpec()
    coupling_lambda: float = Field(default=math.exp(0.7), ge=0.0)
    theta: float = 0.0
    truncation_n: int = Field(default=10_000, ge=10, le=25_000)
    scale_grid: ScaleGridSpec = ScaleGridSpec()
    q_list: tuple[float, ...] = (1.5, 2.0)
    m: float = Field(default=2.0, gt=0.0)
    n_samples: int = Field(default=50, ge=1)
    seed: int = 0
    slack: SlackSpec = SlackSpec()
    diophantine: DiophantineParams = DiophantineParams()
    mborel_suite: MBorelSuiteSpec = MBorelSuiteSpec()
    localization: LocalizationSpec = LocalizationSpec()
    transition: TransitionSpec = TransitionSpec()
    c_cal: float = Field(default=100.0, gt=0.0)
    workers: int = Field(default=1, ge=1)
    out_dir: Path | None = None

    @model_validator(mode="after")
    def _renyi_orders_above_one(self) -> ExperimentConfig:
        if any(q <= 1.0 for q in self.q_list):
            raise ValueError("every q in q_list must exceed 1")
        return self

    def numerics(self) -> NumericsConfig:
        return NumericsConfig(workers=self.workers)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment configuration file."""

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc
