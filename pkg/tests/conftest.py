"""Shared test fixtures."""

from pathlib import Path

import numpy as np
import pytest

from regattack.core.data import Dataset, synthesize_dataset
from regattack.core.models import Activation, SynthSpec
from regattack.core.regressors import MlpModel, RidgeModel


@pytest.fixture(autouse=True)
def fixed_terminal_width(monkeypatch: pytest.MonkeyPatch) -> None:
    """Fix terminal width for consistent Rich output across different environments.

    This prevents CI/local environment differences in terminal width from causing
    test failures due to line wrapping in Rich console output.
    """
    monkeypatch.setenv("COLUMNS", "200")
    monkeypatch.setenv("LINES", "50")


@pytest.fixture(autouse=True)
def isolated_config_home(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point XDG_CONFIG_HOME at an empty directory so a user config never leaks in."""
    config_home = tmp_path / "xdg"
    monkeypatch.setenv("XDG_CONFIG_HOME", str(config_home))
    return config_home


@pytest.fixture
def fixtures_dir() -> Path:
    """Return the path to the fixtures directory."""
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def sample_config(fixtures_dir: Path) -> Path:
    """Return the path to the sample config.toml."""
    return fixtures_dir / "config.toml"


@pytest.fixture
def sample_dataset_csv(fixtures_dir: Path) -> Path:
    """Return the path to the small hand-written dataset CSV."""
    return fixtures_dir / "tiny_dataset.csv"


@pytest.fixture
def small_spec() -> SynthSpec:
    """A synthetic recipe small enough for unit tests."""
    return SynthSpec(n_subjects=3, samples_per_subject=40, feature_dim=6, seed=7)


@pytest.fixture
def small_dataset(small_spec: SynthSpec) -> Dataset:
    """Normalized synthetic dataset: 3 subjects x 40 samples x 6 features."""
    return synthesize_dataset(small_spec)


@pytest.fixture
def identity_model() -> RidgeModel:
    """One-feature linear model g(x) = x."""
    return RidgeModel(weights=np.array([1.0]), intercept=0.0)


@pytest.fixture
def linear_model() -> RidgeModel:
    """Four-feature linear model with mixed-sign weights."""
    return RidgeModel(weights=np.array([0.8, -0.5, 1.2, 0.3]), intercept=0.1)


@pytest.fixture
def tiny_mlp() -> MlpModel:
    """Hand-built 4-3-1 tanh network."""
    return MlpModel(
        layer_weights=[
            np.array(
                [
                    [0.5, -0.3, 0.8, 0.1],
                    [-0.2, 0.7, 0.4, -0.6],
                    [0.9, 0.2, -0.5, 0.3],
                ]
            ),
            np.array([[1.0, -0.8, 0.6]]),
        ],
        layer_biases=[np.array([0.1, -0.1, 0.05]), np.array([0.2])],
        activation=Activation.TANH,
    )
