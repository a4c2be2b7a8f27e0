"""Tests for regattack.core.models."""

import numpy as np
import pytest
from pydantic import ValidationError

from regattack.core.models import (
    DEFAULT_EPSILON_GRID,
    AttackMethod,
    AttackResult,
    CwConfig,
    Direction,
    ExperimentConfig,
    ExperimentReport,
    IfgsmConfig,
    ModelKind,
    NormalizationRecord,
    ReportMethod,
    RunConfig,
    Scenario,
    SynthSpec,
    TrainConfig,
    TransferReport,
    is_successful,
)


class TestEnums:
    """Tests for the string enums."""

    def test_model_kind_values(self) -> None:
        """ModelKind has the two victim families."""
        assert ModelKind.RIDGE.value == "ridge"
        assert ModelKind.MLP.value == "mlp"

    def test_scenario_is_str(self) -> None:
        """Scenario values are strings."""
        assert isinstance(Scenario.WITHIN_SUBJECT, str)
        assert Scenario.CROSS_SUBJECT == "cross_subject"

    def test_report_method_covers_attacks(self) -> None:
        """Every attack method is also a report method."""
        for method in AttackMethod:
            assert ReportMethod(method.value).value == method.value
        assert ReportMethod.BASELINE.value == "baseline"

    def test_direction_sign(self) -> None:
        """Direction.sign is +1 for increase and -1 for decrease."""
        assert Direction.INCREASE.sign == 1.0
        assert Direction.DECREASE.sign == -1.0


class TestTrainConfig:
    """Tests for TrainConfig."""

    def test_defaults(self) -> None:
        """Defaults match the documented training protocol."""
        config = TrainConfig()

        assert config.learning_rate == 1e-3
        assert config.max_epochs == 500
        assert config.patience == 20
        assert config.batch_size == 32
        assert config.hidden_sizes == (50, 50)

    def test_rejects_zero_width_layer(self) -> None:
        """Hidden layers must have positive width."""
        with pytest.raises(ValidationError, match="hidden_sizes"):
            TrainConfig(hidden_sizes=(10, 0))

    def test_is_frozen(self) -> None:
        """Config instances are immutable."""
        config = TrainConfig()

        with pytest.raises(ValidationError):
            config.max_epochs = 3  # type: ignore[misc]


class TestCwConfig:
    """Tests for CwConfig."""

    def test_defaults(self) -> None:
        """Defaults: t=0.2, 100 iterations, 9 rounds, c0=0.01."""
        config = CwConfig()

        assert config.t == 0.2
        assert config.iterations == 100
        assert config.binary_search_steps == 9
        assert config.initial_const == 0.01
        assert config.c_upper_init == 1e4
        assert config.c_lower_init == 0.0

    def test_rejects_inverted_bracket(self) -> None:
        """The lower bracket must be below the upper one."""
        with pytest.raises(ValidationError, match="c_lower_init"):
            CwConfig(c_lower_init=10.0, c_upper_init=5.0)

    def test_rejects_non_positive_t(self) -> None:
        """t must be positive."""
        with pytest.raises(ValidationError):
            CwConfig(t=0.0)


class TestIfgsmConfig:
    """Tests for IfgsmConfig."""

    def test_default_grid(self) -> None:
        """Default grid is 0.001 .. 0.030 in steps of 0.001."""
        config = IfgsmConfig()

        assert config.epsilon_grid == DEFAULT_EPSILON_GRID
        assert len(DEFAULT_EPSILON_GRID) == 30
        assert DEFAULT_EPSILON_GRID[0] == 0.001
        assert DEFAULT_EPSILON_GRID[-1] == 0.03

    def test_alpha_must_not_exceed_epsilon(self) -> None:
        """alpha > epsilon is rejected."""
        with pytest.raises(ValidationError, match="alpha"):
            IfgsmConfig(epsilon=0.01, alpha=0.02, epsilon_grid=None)

    def test_grid_must_ascend(self) -> None:
        """A non-ascending grid is rejected."""
        with pytest.raises(ValidationError, match="ascending"):
            IfgsmConfig(epsilon_grid=(0.01, 0.005))

    def test_empty_grid_rejected(self) -> None:
        """An empty grid is rejected; None disables the grid instead."""
        with pytest.raises(ValidationError, match="empty"):
            IfgsmConfig(epsilon_grid=())

    def test_grid_can_be_disabled(self) -> None:
        """epsilon_grid=None is allowed."""
        assert IfgsmConfig(epsilon_grid=None).epsilon_grid is None


class TestExperimentConfig:
    """Tests for ExperimentConfig."""

    def test_attacks_share_target(self) -> None:
        """cw and ifgsm must agree on t."""
        with pytest.raises(ValidationError, match="share"):
            ExperimentConfig(cw=CwConfig(t=0.3))

    def test_attacks_share_direction(self) -> None:
        """cw and ifgsm must agree on direction."""
        with pytest.raises(ValidationError, match="share"):
            ExperimentConfig(ifgsm=IfgsmConfig(direction=Direction.DECREASE))

    def test_train_fraction_bounds(self) -> None:
        """train_fraction lies strictly between 0 and 1."""
        with pytest.raises(ValidationError):
            ExperimentConfig(train_fraction=1.0)


class TestSynthSpec:
    """Tests for SynthSpec."""

    def test_defaults(self) -> None:
        """Defaults: 15 subjects x 1000 samples x 60 features."""
        spec = SynthSpec()

        assert spec.n_subjects == 15
        assert spec.samples_per_subject == 1000
        assert spec.feature_dim == 60


class TestNormalizationRecord:
    """Tests for NormalizationRecord."""

    def test_apply_and_invert(self) -> None:
        """apply scales into [0, 1] and invert undoes it."""
        # Arrange
        record = NormalizationRecord(minimum=[0.0, 10.0], maximum=[2.0, 20.0])
        raw = np.array([[1.0, 15.0], [2.0, 10.0]])

        # Act
        scaled = record.apply(raw)

        # Assert
        np.testing.assert_allclose(scaled, [[0.5, 0.5], [1.0, 0.0]])
        np.testing.assert_allclose(record.invert(scaled), raw)

    def test_apply_clamps(self) -> None:
        """Values outside the fitted range are clamped."""
        record = NormalizationRecord(minimum=[0.0], maximum=[1.0])

        np.testing.assert_allclose(record.apply(np.array([[-1.0], [3.0]])), [[0], [1]])

    def test_rejects_empty_range(self) -> None:
        """minimum must be strictly below maximum."""
        with pytest.raises(ValidationError, match="not below"):
            NormalizationRecord(minimum=[1.0], maximum=[1.0])


class TestAttackResult:
    """Tests for AttackResult."""

    def _result(self) -> AttackResult:
        return AttackResult(
            x_original=np.array([0.1]),
            x_adversarial=np.array([0.4]),
            output_before=0.1,
            output_after=0.4,
            t=0.2,
            success=True,
            distortion_l2=0.3,
            distortion_linf=0.3,
            iterations_used=5,
            method=AttackMethod.IFGSM_R,
        )

    def test_output_shift(self) -> None:
        """output_shift is after minus before."""
        assert self._result().output_shift == pytest.approx(0.3)

    def test_with_ids(self) -> None:
        """with_ids returns a tagged copy and leaves the original alone."""
        # Arrange
        result = self._result()

        # Act
        tagged = result.with_ids("S01:3", "S01")

        # Assert
        assert tagged.example_id == "S01:3"
        assert tagged.unit_id == "S01"
        assert result.example_id == ""


class TestIsSuccessful:
    """Tests for is_successful."""

    def test_increase(self) -> None:
        """Increase needs after >= before + t."""
        assert is_successful(0.1, 0.35, 0.2, Direction.INCREASE)
        assert not is_successful(0.1, 0.29, 0.2, Direction.INCREASE)

    def test_decrease(self) -> None:
        """Decrease needs after <= before - t."""
        assert is_successful(0.5, 0.3, 0.2, Direction.DECREASE)
        assert not is_successful(0.5, 0.31, 0.2, Direction.DECREASE)

    def test_elementwise(self) -> None:
        """Arrays are judged row by row."""
        # Arrange
        before = np.array([0.1, 0.1, 0.4])
        after = np.array([0.35, 0.2, 0.7])

        # Act
        success = is_successful(before, after, 0.2, Direction.INCREASE)

        # Assert
        np.testing.assert_array_equal(success, [True, False, True])


class TestExperimentReport:
    """Tests for ExperimentReport."""

    def test_baseline_rejects_attack_columns(self) -> None:
        """Baseline rows carry no ASR."""
        with pytest.raises(ValidationError, match="baseline"):
            ExperimentReport(
                scenario=Scenario.WITHIN_SUBJECT,
                dataset_id="d",
                model_kind=ModelKind.RIDGE,
                method=ReportMethod.BASELINE,
                rmse=0.1,
                mean_output=0.3,
                asr=0.5,
                n_examples=10,
            )

    def test_asr_bounds(self) -> None:
        """ASR lies in [0, 1]."""
        with pytest.raises(ValidationError):
            ExperimentReport(
                scenario=Scenario.WITHIN_SUBJECT,
                dataset_id="d",
                model_kind=ModelKind.RIDGE,
                method=ReportMethod.CW_R,
                rmse=0.1,
                mean_output=0.3,
                asr=1.5,
                mean_distortion=0.1,
                n_examples=10,
            )


class TestTransferReport:
    """Tests for TransferReport."""

    def test_method_optional(self) -> None:
        """method defaults to None."""
        report = TransferReport(
            source_model=ModelKind.MLP,
            target_model=ModelKind.RIDGE,
            mean_output_source=0.5,
            mean_output_target=0.4,
            asr_on_target=0.25,
        )

        assert report.method is None
        assert report.n_examples == 0


class TestRunConfig:
    """Tests for RunConfig."""

    def test_defaults(self) -> None:
        """Defaults: within-subject ridge with all three methods."""
        config = RunConfig()

        assert config.scenarios == [Scenario.WITHIN_SUBJECT]
        assert config.model_kinds == [ModelKind.RIDGE]
        assert config.methods == [
            AttackMethod.CW_R,
            AttackMethod.IFGSM_R,
            AttackMethod.RANDOM_NOISE,
        ]
        assert config.use_grid is True
        assert config.save_vectors is True

    def test_validates_nested_dict(self) -> None:
        """Nested dicts validate into config models."""
        config = RunConfig.model_validate(
            {"experiment": {"cw": {"t": 0.1}, "ifgsm": {"t": 0.1}}}
        )

        assert config.experiment.cw.t == 0.1
        assert config.experiment.ifgsm.t == 0.1
