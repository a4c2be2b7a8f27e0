"""Data models for regattack."""

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_EPSILON_GRID: tuple[float, ...] = tuple(
    round(0.001 * i, 3) for i in range(1, 31)
)


class ModelKind(str, Enum):
    """Victim regression model families."""

    RIDGE = "ridge"
    MLP = "mlp"


class Activation(str, Enum):
    """Hidden-layer nonlinearities for the MLP."""

    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"


class Scenario(str, Enum):
    """Train/test protocols."""

    WITHIN_SUBJECT = "within_subject"
    CROSS_SUBJECT = "cross_subject"


class AttackMethod(str, Enum):
    """Ways of crafting a perturbed input."""

    CW_R = "cw_r"
    IFGSM_R = "ifgsm_r"
    RANDOM_NOISE = "random_noise"


class ReportMethod(str, Enum):
    """Row kinds of an experiment report."""

    BASELINE = "baseline"
    CW_R = "cw_r"
    IFGSM_R = "ifgsm_r"
    RANDOM_NOISE = "random_noise"


class Direction(str, Enum):
    """Which way the attacker pushes the regression output."""

    INCREASE = "increase"
    DECREASE = "decrease"

    @property
    def sign(self) -> float:
        """+1.0 for increase, -1.0 for decrease."""
        return 1.0 if self is Direction.INCREASE else -1.0


# Configuration models


class TrainConfig(BaseModel):
    """MLP training protocol."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(1e-3, gt=0)
    max_epochs: int = Field(500, gt=0)
    patience: int = Field(20, gt=0)
    batch_size: int = Field(32, gt=0)
    validation_fraction: float = Field(0.1, gt=0, lt=1)
    seed: int = Field(0, ge=0)
    hidden_sizes: tuple[int, ...] = (50, 50)
    activation: Activation = Activation.RELU

    @field_validator("hidden_sizes")
    @classmethod
    def _positive_widths(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(width <= 0 for width in value):
            raise ValueError("hidden_sizes must be a non-empty list of positive ints")
        return value


class CwConfig(BaseModel):
    """CW-R hyperparameters."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(0.2, gt=0)
    iterations: int = Field(100, gt=0)
    binary_search_steps: int = Field(9, gt=0)
    initial_const: float = Field(0.01, gt=0)
    inner_lr: float = Field(0.01, gt=0)
    c_upper_init: float = Field(1e4, gt=0)
    c_lower_init: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)
    direction: Direction = Direction.INCREASE

    @model_validator(mode="after")
    def _bracket_ordered(self) -> Self:
        if self.c_lower_init >= self.c_upper_init:
            raise ValueError("c_lower_init must be smaller than c_upper_init")
        return self


class IfgsmConfig(BaseModel):
    """IFGSM-R hyperparameters."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(0.2, gt=0)
    iterations: int = Field(25, gt=0)
    epsilon: float = Field(0.03, gt=0)
    alpha: float = Field(0.001, gt=0)
    epsilon_grid: tuple[float, ...] | None = DEFAULT_EPSILON_GRID
    direction: Direction = Direction.INCREASE

    @model_validator(mode="after")
    def _check_steps(self) -> Self:
        if self.alpha > self.epsilon:
            raise ValueError("alpha must not exceed epsilon")
        if self.epsilon_grid is not None:
            grid = self.epsilon_grid
            if not grid:
                raise ValueError("epsilon_grid must not be empty")
            if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("epsilon_grid must be positive and strictly ascending")
            if self.alpha > grid[0]:
                raise ValueError("alpha must not exceed the smallest grid epsilon")
        return self


class SynthSpec(BaseModel):
    """Synthetic multi-subject dataset recipe."""

    model_config = ConfigDict(frozen=True)

    n_subjects: int = Field(15, ge=1)
    samples_per_subject: int = Field(1000, ge=1)
    feature_dim: int = Field(60, ge=1)
    subject_shift_scale: float = Field(0.3, ge=0)
    noise_scale: float = Field(0.05, ge=0)
    seed: int = Field(0, ge=0)
    weight_scale: float = Field(1.3, gt=0)
    target_bias: float = -0.8


class ExperimentConfig(BaseModel):
    """Everything run_experiment needs besides the dataset."""

    model_config = ConfigDict(frozen=True)

    ridge_lambda: float = Field(0.1, ge=0)
    train_fraction: float = Field(0.9, gt=0, lt=1)
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    cw: CwConfig = Field(default_factory=CwConfig)
    ifgsm: IfgsmConfig = Field(default_factory=IfgsmConfig)

    @model_validator(mode="after")
    def _shared_target(self) -> Self:
        if self.cw.t != self.ifgsm.t or self.cw.direction != self.ifgsm.direction:
            raise ValueError("cw and ifgsm must share t and direction")
        return self


class NormalizationRecord(BaseModel):
    """Per-feature min-max scaling parameters."""

    model_config = ConfigDict(frozen=True)

    minimum: list[float]
    maximum: list[float]

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if len(self.minimum) != len(self.maximum):
            raise ValueError("minimum and maximum must have the same length")
        for i, (lo, hi) in enumerate(zip(self.minimum, self.maximum, strict=True)):
            if not lo < hi:
                raise ValueError(f"feature {i}: minimum {lo} is not below maximum {hi}")
        return self

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Scale features into [0, 1], clamping values outside the recorded range."""
        lo = np.asarray(self.minimum)
        hi = np.asarray(self.maximum)
        return np.clip((np.asarray(features, dtype=float) - lo) / (hi - lo), 0.0, 1.0)

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        """Map scaled features back to original units."""
        lo = np.asarray(self.minimum)
        hi = np.asarray(self.maximum)
        return np.asarray(scaled, dtype=float) * (hi - lo) + lo


# Results and reports


@dataclass(frozen=True)
class AttackResult:
    """Outcome of attacking one example."""

    x_original: np.ndarray
    x_adversarial: np.ndarray
    output_before: float
    output_after: float
    t: float
    success: bool
    distortion_l2: float
    distortion_linf: float
    iterations_used: int
    method: AttackMethod
    direction: Direction = Direction.INCREASE
    epsilon: float | None = None
    search_constants: tuple[float, ...] = ()
    example_id: str = ""
    unit_id: str = ""

    @property
    def output_shift(self) -> float:
        """Signed change of the model output."""
        return self.output_after - self.output_before

    def with_ids(self, example_id: str, unit_id: str) -> "AttackResult":
        """Return a copy tagged with example and unit ids."""
        return replace(self, example_id=example_id, unit_id=unit_id)


def is_successful(
    output_before: float | np.ndarray,
    output_after: float | np.ndarray,
    t: float,
    direction: Direction,
) -> np.ndarray:
    """Success predicate g(x') >= g(x) + t (mirrored for decrease), elementwise."""
    before = np.asarray(output_before, dtype=np.float64)
    after = np.asarray(output_after, dtype=np.float64)
    if direction is Direction.INCREASE:
        return after >= before + t
    return after <= before - t


class ExperimentReport(BaseModel):
    """One report row: scenario x dataset x model x method."""

    scenario: Scenario
    dataset_id: str
    model_kind: ModelKind
    method: ReportMethod
    rmse: float
    mean_output: float
    asr: float | None = Field(None, ge=0, le=1)
    mean_distortion: float | None = Field(None, ge=0)
    n_examples: int = Field(ge=1)
    config_snapshot: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _baseline_has_no_attack_columns(self) -> Self:
        if self.method is ReportMethod.BASELINE and (
            self.asr is not None or self.mean_distortion is not None
        ):
            raise ValueError("baseline rows carry no asr or distortion")
        return self


class TransferReport(BaseModel):
    """Adversarial examples from one model replayed against another."""

    source_model: ModelKind
    target_model: ModelKind
    method: AttackMethod | None = None
    mean_output_source: float
    mean_output_target: float
    mean_output_target_original: float | None = None
    asr_on_target: float = Field(ge=0, le=1)
    n_examples: int = Field(0, ge=0)


class UnitFailure(BaseModel):
    """A campaign unit (subject or held-out subject) that did not complete."""

    unit_id: str
    stage: str
    error: str


class RunConfig(BaseModel):
    """Command-level settings; serialized as the run snapshot."""

    dataset: Path | None = None
    run_dir: Path | None = None
    scenarios: list[Scenario] = Field(
        default_factory=lambda: [Scenario.WITHIN_SUBJECT]
    )
    model_kinds: list[ModelKind] = Field(default_factory=lambda: [ModelKind.RIDGE])
    methods: list[AttackMethod] = Field(
        default_factory=lambda: [
            AttackMethod.CW_R,
            AttackMethod.IFGSM_R,
            AttackMethod.RANDOM_NOISE,
        ]
    )
    use_grid: bool = True
    save_vectors: bool = True
    synth: SynthSpec = Field(default_factory=SynthSpec)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)


class TrainMeta(BaseModel):
    """What happened while fitting an MLP."""

    seed: int
    epochs_run: int
    best_epoch: int
    best_validation_rmse: float
    n_train: int
    n_validation: int
