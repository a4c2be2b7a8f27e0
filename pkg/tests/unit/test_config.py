"""Tests for regattack.core.config."""

import json
import tomllib
from pathlib import Path

import pytest

from regattack.core.config import (
    ConfigValidationError,
    ValidationError,
    build_run_config,
    generate_config,
    get_config_dir,
    get_default_config_path,
    load_run_config,
    merge_config,
    read_config_file,
    resolve_path,
    snapshot_path,
    write_snapshot,
)
from regattack.core.exceptions import RegAttackError
from regattack.core.models import (
    AttackMethod,
    Direction,
    ModelKind,
    RunConfig,
    Scenario,
)


class TestGetConfigDir:
    """Tests for get_config_dir function."""

    def test_uses_xdg_config_home_when_set(
        self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path
    ) -> None:
        """get_config_dir uses XDG_CONFIG_HOME when set."""
        # Arrange
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))

        # Act
        result = get_config_dir()

        # Assert
        assert result == tmp_path / "regattack"

    def test_uses_default_when_xdg_config_home_not_set(
        self, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """get_config_dir uses ~/.config/regattack when XDG_CONFIG_HOME not set."""
        # Arrange
        monkeypatch.delenv("XDG_CONFIG_HOME", raising=False)

        # Act
        result = get_config_dir()

        # Assert
        assert result == Path.home() / ".config" / "regattack"

    def test_uses_default_when_xdg_config_home_whitespace(
        self, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Whitespace-only XDG_CONFIG_HOME is ignored."""
        # Arrange
        monkeypatch.setenv("XDG_CONFIG_HOME", "   ")

        # Act
        result = get_config_dir()

        # Assert
        assert result == Path.home() / ".config" / "regattack"


class TestGetDefaultConfigPath:
    """Tests for get_default_config_path function."""

    def test_returns_config_toml_in_config_dir(
        self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path
    ) -> None:
        """Returns config.toml inside the config directory."""
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))

        assert get_default_config_path() == tmp_path / "regattack" / "config.toml"


class TestResolvePath:
    """Tests for resolve_path function."""

    def test_expand_tilde(self) -> None:
        """~ expands to the home directory."""
        assert resolve_path("~/runs") == Path.home() / "runs"

    def test_relative_path_to_absolute(
        self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path
    ) -> None:
        """Relative paths resolve against the working directory."""
        monkeypatch.chdir(tmp_path)

        assert resolve_path("data.csv") == tmp_path.resolve() / "data.csv"


class TestConfigValidationError:
    """Tests for ConfigValidationError."""

    def test_is_regattack_error(self) -> None:
        """ConfigValidationError derives from RegAttackError."""
        assert issubclass(ConfigValidationError, RegAttackError)

    def test_errors_defaults_to_empty_list(self) -> None:
        """errors defaults to an empty list."""
        assert ConfigValidationError("bad").errors == []

    def test_stores_errors_list(self) -> None:
        """errors holds ValidationError entries."""
        errors = [ValidationError(field="experiment.seed", message="too small")]

        assert ConfigValidationError("bad", errors).errors == errors


class TestReadConfigFile:
    """Tests for read_config_file."""

    def test_reads_toml(self, sample_config: Path) -> None:
        """TOML files are parsed into dicts."""
        data = read_config_file(sample_config)

        assert data["synth"]["n_subjects"] == 4
        assert data["experiment"]["cw"]["iterations"] == 40

    def test_reads_json(self, tmp_path: Path) -> None:
        """Files ending in .json are parsed as JSON."""
        path = tmp_path / "run_config.json"
        path.write_text(json.dumps({"use_grid": False}), encoding="utf-8")

        assert read_config_file(path) == {"use_grid": False}

    def test_file_not_found(self, tmp_path: Path) -> None:
        """Missing files raise FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            read_config_file(tmp_path / "missing.toml")

    def test_invalid_toml(self, tmp_path: Path) -> None:
        """Broken TOML raises ConfigValidationError."""
        path = tmp_path / "config.toml"
        path.write_text("[experiment\nseed = 1", encoding="utf-8")

        with pytest.raises(ConfigValidationError, match="Invalid TOML"):
            read_config_file(path)

    def test_invalid_json(self, tmp_path: Path) -> None:
        """Broken JSON raises ConfigValidationError."""
        path = tmp_path / "config.json"
        path.write_text("{", encoding="utf-8")

        with pytest.raises(ConfigValidationError, match="Invalid JSON"):
            read_config_file(path)

    def test_json_root_must_be_table(self, tmp_path: Path) -> None:
        """A JSON list is not a config."""
        path = tmp_path / "config.json"
        path.write_text("[1, 2]", encoding="utf-8")

        with pytest.raises(ConfigValidationError, match="table"):
            read_config_file(path)


class TestMergeConfig:
    """Tests for merge_config."""

    def test_nested_merge(self) -> None:
        """Nested tables are merged key by key."""
        base = {"experiment": {"seed": 1, "cw": {"t": 0.2}}}

        merged = merge_config(base, {"experiment": {"cw": {"iterations": 5}}})

        assert merged == {"experiment": {"seed": 1, "cw": {"t": 0.2, "iterations": 5}}}

    def test_dotted_keys(self) -> None:
        """Dotted keys address nested tables."""
        merged = merge_config({"experiment": {"seed": 1}}, {"experiment.cw.t": 0.3})

        assert merged == {"experiment": {"seed": 1, "cw": {"t": 0.3}}}

    def test_base_is_not_mutated(self) -> None:
        """merge_config returns a new dict."""
        base = {"experiment": {"seed": 1}}

        merge_config(base, {"experiment.seed": 2})

        assert base == {"experiment": {"seed": 1}}


class TestBuildRunConfig:
    """Tests for build_run_config."""

    def test_collects_field_errors(self) -> None:
        """Each invalid field becomes one ValidationError with a dotted path."""
        # Arrange
        data = {"experiment": {"seed": -1, "train_fraction": 2.0}}

        # Act
        with pytest.raises(ConfigValidationError) as exc_info:
            build_run_config(data)

        # Assert
        fields = {error.field for error in exc_info.value.errors}
        assert fields == {"experiment.seed", "experiment.train_fraction"}

    def test_invalid_enum(self) -> None:
        """Unknown model kinds are rejected."""
        with pytest.raises(ConfigValidationError, match="model_kinds"):
            build_run_config({"model_kinds": ["forest"]})


class TestLoadRunConfig:
    """Tests for load_run_config."""

    def test_defaults(self) -> None:
        """Without any file the defaults apply."""
        assert load_run_config() == RunConfig()

    def test_config_file(self, sample_config: Path) -> None:
        """Values from --config override the defaults."""
        config = load_run_config(path=sample_config)

        assert config.synth.n_subjects == 4
        assert config.experiment.ridge_lambda == 0.5
        assert config.experiment.cw.iterations == 40
        assert config.experiment.cw.t == 0.2

    def test_user_config_is_read(self, isolated_config_home: Path) -> None:
        """The XDG config file applies below explicit files."""
        # Arrange
        user_config = isolated_config_home / "regattack" / "config.toml"
        user_config.parent.mkdir(parents=True)
        user_config.write_text("[experiment]\nseed = 11\n", encoding="utf-8")

        # Act
        config = load_run_config()

        # Assert
        assert config.experiment.seed == 11

    def test_user_config_can_be_skipped(self, isolated_config_home: Path) -> None:
        """use_user_config=False ignores the XDG file."""
        user_config = isolated_config_home / "regattack" / "config.toml"
        user_config.parent.mkdir(parents=True)
        user_config.write_text("[experiment]\nseed = 11\n", encoding="utf-8")

        assert load_run_config(use_user_config=False).experiment.seed == 0

    def test_precedence(self, sample_config: Path) -> None:
        """base < config file < overrides; None overrides are ignored."""
        # Act
        config = load_run_config(
            path=sample_config,
            overrides={
                "experiment.ridge_lambda": 2.0,
                "experiment.seed": None,
                "methods": [AttackMethod.CW_R],
            },
            base={"experiment": {"seed": 5, "ridge_lambda": 9.0}},
        )

        # Assert
        assert config.experiment.ridge_lambda == 2.0
        assert config.experiment.seed == 5
        assert config.methods == [AttackMethod.CW_R]

    def test_overrides_keep_shared_target_consistent(self) -> None:
        """Overriding only one attack's t is rejected."""
        with pytest.raises(ConfigValidationError, match="share"):
            load_run_config(overrides={"experiment.cw.t": 0.3})

    def test_enum_overrides(self) -> None:
        """Enum members from the CLI validate as-is."""
        config = load_run_config(
            overrides={
                "scenarios": [Scenario.CROSS_SUBJECT],
                "model_kinds": [ModelKind.MLP, ModelKind.RIDGE],
                "experiment.cw.direction": Direction.DECREASE,
                "experiment.ifgsm.direction": Direction.DECREASE,
            }
        )

        assert config.scenarios == [Scenario.CROSS_SUBJECT]
        assert config.model_kinds == [ModelKind.MLP, ModelKind.RIDGE]
        assert config.experiment.ifgsm.direction is Direction.DECREASE


class TestGenerateConfig:
    """Tests for generate_config function."""

    def test_generate_config_creates_file(self, tmp_path: Path) -> None:
        """generate_config writes config.toml."""
        # Arrange
        path = tmp_path / "config.toml"

        # Act
        result = generate_config(path)

        # Assert
        assert result == path
        assert path.exists()

    def test_generate_config_default_location(self, isolated_config_home: Path) -> None:
        """Without a path the XDG location is used."""
        result = generate_config()

        assert result == isolated_config_home / "regattack" / "config.toml"

    def test_generate_config_content_structure(self, tmp_path: Path) -> None:
        """Top-level keys come first, then one table per section."""
        path = generate_config(tmp_path / "config.toml")

        data = tomllib.loads(path.read_text(encoding="utf-8"))

        assert data["scenarios"] == ["within_subject"]
        assert data["experiment"]["cw"]["binary_search_steps"] == 9
        assert data["experiment"]["ifgsm"]["epsilon_grid"][0] == 0.001
        assert "dataset" not in data

    def test_generate_config_file_exists_raises_error(self, tmp_path: Path) -> None:
        """An existing file is not overwritten by default."""
        path = tmp_path / "config.toml"
        path.write_text("# mine\n", encoding="utf-8")

        with pytest.raises(FileExistsError):
            generate_config(path)

        assert path.read_text(encoding="utf-8") == "# mine\n"

    def test_generate_config_force_overwrites(self, tmp_path: Path) -> None:
        """force=True overwrites."""
        path = tmp_path / "config.toml"
        path.write_text("# mine\n", encoding="utf-8")

        generate_config(path, force=True)

        assert "[experiment]" in path.read_text(encoding="utf-8")

    def test_generate_config_roundtrip(self, tmp_path: Path) -> None:
        """The generated file loads back to the defaults."""
        path = generate_config(tmp_path / "config.toml")

        assert load_run_config(path=path) == RunConfig()


class TestSnapshot:
    """Tests for write_snapshot."""

    def test_round_trip(self, tmp_path: Path) -> None:
        """A snapshot reloads to the same config."""
        # Arrange
        config = load_run_config(
            overrides={"run_dir": str(tmp_path), "model_kinds": ["mlp"]}
        )

        # Act
        path = write_snapshot(config, tmp_path)

        # Assert
        assert path == snapshot_path(tmp_path) == tmp_path / "run_config.json"
        assert load_run_config(path=path) == config
