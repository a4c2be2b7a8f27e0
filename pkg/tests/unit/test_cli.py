"""Unit tests for CLI application."""

import json
from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from regattack import __version__
from regattack.cli.app import app

runner = CliRunner()

SMALL_SYNTH = ["--subjects", "3", "--samples", "30", "--features", "6", "--seed", "1"]
FAST_CW = ["--cw-iterations", "20", "--binary-search-steps", "3"]


def _synth(path: Path) -> Path:
    result = runner.invoke(app, ["synth", str(path), *SMALL_SYNTH])
    assert result.exit_code == 0, result.stdout
    return path


def _train(dataset: Path, run_dir: Path, *extra: str) -> None:
    result = runner.invoke(
        app, ["train", str(dataset), "--run-dir", str(run_dir), *extra]
    )
    assert result.exit_code == 0, result.stdout


@pytest.fixture
def dataset_path(tmp_path: Path) -> Path:
    """A small synthetic dataset written by the synth command."""
    return _synth(tmp_path / "data.csv")


@pytest.fixture
def trained_run(tmp_path: Path, dataset_path: Path) -> Path:
    """A run directory with ridge models for the within-subject scenario."""
    run_dir = tmp_path / "run"
    _train(dataset_path, run_dir)
    return run_dir


class TestVersion:
    """Tests for --version option."""

    def test_version_short_flag(self) -> None:
        """Test that -V shows version."""
        # Arrange & Act
        result = runner.invoke(app, ["-V"])

        # Assert
        assert result.exit_code == 0
        assert f"regattack {__version__}" in result.stdout

    def test_version_long_flag(self) -> None:
        """Test that --version shows version."""
        # Arrange & Act
        result = runner.invoke(app, ["--version"])

        # Assert
        assert result.exit_code == 0
        assert f"regattack {__version__}" in result.stdout


class TestHelp:
    """Tests for help display."""

    def test_no_args_shows_help(self) -> None:
        """Test that running without args shows help (with exit code 2)."""
        # Arrange & Act
        result = runner.invoke(app, [])

        # Assert
        # no_args_is_help=True causes exit code 2 (as per Click/Typer behavior)
        assert result.exit_code == 2
        assert "White-box target adversarial attacks" in result.stdout

    def test_help_flag(self) -> None:
        """Test that --help lists the commands."""
        # Arrange & Act
        result = runner.invoke(app, ["--help"])

        # Assert
        assert result.exit_code == 0
        for command in ("init", "synth", "train", "attack", "evaluate", "transfer"):
            assert command in result.stdout


class TestInitCommand:
    """Tests for init command."""

    def test_init_creates_config_file(self, tmp_path: Path) -> None:
        """init writes config.toml at --path."""
        # Arrange
        path = tmp_path / "config.toml"

        # Act
        result = runner.invoke(app, ["init", "--path", str(path)])

        # Assert
        assert result.exit_code == 0
        assert path.exists()
        assert "Created" in result.stdout

    def test_init_default_location(self, isolated_config_home: Path) -> None:
        """Without --path the XDG location is used."""
        result = runner.invoke(app, ["init"])

        assert result.exit_code == 0
        assert (isolated_config_home / "regattack" / "config.toml").exists()

    def test_init_existing_file(self, tmp_path: Path) -> None:
        """An existing file is kept unless --force is given."""
        # Arrange
        path = tmp_path / "config.toml"
        path.write_text("# mine\n", encoding="utf-8")

        # Act
        result = runner.invoke(app, ["init", "--path", str(path)])

        # Assert
        assert result.exit_code == 1
        assert "already exists" in result.stdout
        assert path.read_text(encoding="utf-8") == "# mine\n"

    def test_init_force(self, tmp_path: Path) -> None:
        """--force overwrites the file."""
        path = tmp_path / "config.toml"
        path.write_text("# mine\n", encoding="utf-8")

        result = runner.invoke(app, ["init", "--path", str(path), "--force"])

        assert result.exit_code == 0
        assert "[experiment]" in path.read_text(encoding="utf-8")


class TestSynthCommand:
    """Tests for synth command."""

    def test_writes_dataset_and_sidecar(self, tmp_path: Path) -> None:
        """synth writes the CSV and its .meta.json."""
        # Arrange
        path = tmp_path / "data.csv"

        # Act
        result = runner.invoke(app, ["synth", str(path), *SMALL_SYNTH])

        # Assert
        assert result.exit_code == 0
        assert "3 subjects x 30 samples x 6 features" in result.stdout
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("subject_id,target,ch01_theta")
        assert len(lines) == 1 + 3 * 30
        meta = json.loads((tmp_path / "data.meta.json").read_text(encoding="utf-8"))
        assert meta["synth_spec"]["n_subjects"] == 3
        assert meta["dataset_id"] == "synthetic-1"

    def test_uses_config_file(self, tmp_path: Path, sample_config: Path) -> None:
        """--config supplies the recipe; flags still win."""
        path = tmp_path / "data.csv"

        result = runner.invoke(
            app, ["synth", str(path), "--config", str(sample_config), "--samples", "7"]
        )

        assert result.exit_code == 0
        assert "4 subjects x 7 samples x 8 features" in result.stdout

    def test_rejects_zero_subjects(self, tmp_path: Path) -> None:
        """--subjects must be at least 1."""
        result = runner.invoke(
            app, ["synth", str(tmp_path / "d.csv"), "--subjects", "0"]
        )

        assert result.exit_code == 2

    def test_invalid_config_file(self, tmp_path: Path) -> None:
        """A broken config file is reported as an error."""
        config = tmp_path / "bad.toml"
        config.write_text("[synth]\nn_subjects = 0\n", encoding="utf-8")

        result = runner.invoke(
            app, ["synth", str(tmp_path / "d.csv"), "--config", str(config)]
        )

        assert result.exit_code == 1
        assert "synth.n_subjects" in result.stdout


class TestTrainCommand:
    """Tests for train command."""

    def test_writes_run_layout(self, trained_run: Path) -> None:
        """train writes the snapshot, models, splits and the baseline report."""
        out = trained_run / "within_subject" / "ridge"

        assert (trained_run / "run_config.json").exists()
        assert sorted(p.name for p in (out / "models").iterdir()) == [
            "S01.json",
            "S02.json",
            "S03.json",
        ]
        splits = json.loads((out / "splits.json").read_text(encoding="utf-8"))
        assert len(splits["S01"]["test"]) == 3
        assert (out / "reports" / "baseline.csv").exists()
        assert not (trained_run / "errors.json").exists()

    def test_shows_baseline_table(self, tmp_path: Path, dataset_path: Path) -> None:
        """The baseline table is printed."""
        result = runner.invoke(
            app, ["train", str(dataset_path), "--run-dir", str(tmp_path / "r")]
        )

        assert result.exit_code == 0
        assert "Baseline" in result.stdout
        assert "within_subject" in result.stdout

    def test_missing_dataset(self, tmp_path: Path) -> None:
        """A missing dataset is an error."""
        result = runner.invoke(
            app,
            ["train", str(tmp_path / "none.csv"), "--run-dir", str(tmp_path / "r")],
        )

        assert result.exit_code == 1
        assert "Error" in result.stdout

    def test_unit_failures_write_errors_json(self, tmp_path: Path) -> None:
        """Failed units exit 1 and are listed in errors.json."""
        # Arrange
        rng = np.random.default_rng(0)
        lines = ["subject_id,target,f1,f2"]
        for sid in ("A", "B"):
            for _ in range(10):
                value = rng.uniform()
                lines.append(f"{sid},{rng.uniform()},{value},{value}")
        dataset = tmp_path / "collinear.csv"
        dataset.write_text("\n".join(lines) + "\n", encoding="utf-8")
        run_dir = tmp_path / "run"

        # Act
        result = runner.invoke(
            app,
            ["train", str(dataset), "--run-dir", str(run_dir), "--ridge-lambda", "0"],
        )

        # Assert
        assert result.exit_code == 1
        errors = json.loads((run_dir / "errors.json").read_text(encoding="utf-8"))
        assert errors["failed"] == 2
        assert errors["failures"][0]["unit_id"] == "within_subject/ridge/A"
        assert errors["failures"][0]["stage"] == "train"
        assert not (run_dir / "within_subject" / "ridge").exists()


class TestAttackCommand:
    """Tests for attack command."""

    def test_requires_trained_run(self, tmp_path: Path) -> None:
        """Attacking an empty directory points at train."""
        result = runner.invoke(app, ["attack", "--run-dir", str(tmp_path)])

        assert result.exit_code == 1
        assert "regattack train" in result.stdout

    def test_writes_results_and_reports(self, trained_run: Path) -> None:
        """Every method gets results, vectors and a report."""
        # Act
        result = runner.invoke(app, ["attack", "--run-dir", str(trained_run), *FAST_CW])

        # Assert
        assert result.exit_code == 0, result.stdout
        out = trained_run / "within_subject" / "ridge"
        for method in ("cw_r", "ifgsm_r", "random_noise"):
            assert (out / "results" / f"{method}.csv").exists()
            assert (out / "results" / f"{method}.adversarial.npy").exists()
            assert (out / "reports" / f"{method}.json").exists()
        assert "Noise sigma" in result.stdout

    def test_snapshot_records_attack_settings(self, trained_run: Path) -> None:
        """Attack flags are written back to the run snapshot."""
        result = runner.invoke(
            app,
            [
                "attack",
                "--run-dir",
                str(trained_run),
                "--method",
                "ifgsm_r",
                "--t",
                "0.1",
                "--no-grid",
            ],
        )

        assert result.exit_code == 0, result.stdout
        snapshot = json.loads(
            (trained_run / "run_config.json").read_text(encoding="utf-8")
        )
        assert snapshot["use_grid"] is False
        assert snapshot["experiment"]["cw"]["t"] == 0.1
        assert snapshot["experiment"]["ifgsm"]["t"] == 0.1

    def test_noise_without_gradient_results(self, trained_run: Path) -> None:
        """random_noise alone needs earlier cw_r or ifgsm_r results."""
        result = runner.invoke(
            app, ["attack", "--run-dir", str(trained_run), "--method", "random_noise"]
        )

        assert result.exit_code == 2
        assert "random_noise needs" in result.stdout

    def test_noise_after_gradient_attack(self, trained_run: Path) -> None:
        """random_noise alone calibrates on stored results."""
        first = runner.invoke(
            app,
            ["attack", "--run-dir", str(trained_run), "--method", "cw_r", *FAST_CW],
        )
        assert first.exit_code == 0, first.stdout

        result = runner.invoke(
            app, ["attack", "--run-dir", str(trained_run), "--method", "random_noise"]
        )

        assert result.exit_code == 0, result.stdout
        out = trained_run / "within_subject" / "ridge" / "results"
        assert (out / "random_noise.csv").exists()

    def test_no_save_vectors(self, trained_run: Path) -> None:
        """--no-save-vectors writes CSVs only."""
        result = runner.invoke(
            app,
            [
                "attack",
                "--run-dir",
                str(trained_run),
                "--method",
                "ifgsm_r",
                "--no-save-vectors",
            ],
        )

        assert result.exit_code == 0, result.stdout
        out = trained_run / "within_subject" / "ridge" / "results"
        assert (out / "ifgsm_r.csv").exists()
        assert not (out / "ifgsm_r.original.npy").exists()


class TestEvaluateCommand:
    """Tests for evaluate command."""

    def test_collects_reports(self, trained_run: Path) -> None:
        """evaluate writes report.csv and report.json with every row."""
        # Arrange
        attack = runner.invoke(
            app,
            ["attack", "--run-dir", str(trained_run), "--method", "cw_r", *FAST_CW],
        )
        assert attack.exit_code == 0, attack.stdout

        # Act
        result = runner.invoke(app, ["evaluate", "--run-dir", str(trained_run)])

        # Assert
        assert result.exit_code == 0, result.stdout
        rows = json.loads((trained_run / "report.json").read_text(encoding="utf-8"))
        assert [row["method"] for row in rows] == ["baseline", "cw_r"]
        assert (trained_run / "report.csv").exists()
        assert "baseline" in result.stdout

    def test_requires_run(self, tmp_path: Path) -> None:
        """evaluate needs a run directory."""
        result = runner.invoke(app, ["evaluate", "--run-dir", str(tmp_path)])

        assert result.exit_code == 1
        assert "run_config.json" in result.stdout


class TestTransferCommand:
    """Tests for transfer command."""

    def test_mlp_to_ridge(self, tmp_path: Path, dataset_path: Path) -> None:
        """Examples crafted on the MLP are replayed on ridge."""
        # Arrange
        run_dir = tmp_path / "run"
        _train(
            dataset_path,
            run_dir,
            "--model",
            "ridge",
            "--model",
            "mlp",
            "--hidden",
            "4",
            "--max-epochs",
            "3",
        )
        attack = runner.invoke(
            app,
            ["attack", "--run-dir", str(run_dir), "--method", "cw_r", *FAST_CW],
        )
        assert attack.exit_code == 0, attack.stdout

        # Act
        result = runner.invoke(
            app,
            [
                "transfer",
                "--run-dir",
                str(run_dir),
                "--source",
                "mlp",
                "--target",
                "ridge",
            ],
        )

        # Assert
        assert result.exit_code == 0, result.stdout
        rows = json.loads(
            (run_dir / "transfer" / "within_subject_mlp_to_ridge.json").read_text(
                encoding="utf-8"
            )
        )
        assert rows[0]["source_model"] == "mlp"
        assert rows[0]["target_model"] == "ridge"
        assert rows[0]["n_examples"] == 9
        assert "Transferability" in result.stdout

    def test_missing_results(self, trained_run: Path) -> None:
        """Transfer without attack results exits with code 2."""
        result = runner.invoke(
            app,
            [
                "transfer",
                "--run-dir",
                str(trained_run),
                "--source",
                "ridge",
                "--target",
                "ridge",
            ],
        )

        assert result.exit_code == 2
        assert "No cw_r results" in result.stdout

    def test_missing_vectors(self, trained_run: Path) -> None:
        """Results without vectors cannot be transferred."""
        attack = runner.invoke(
            app,
            [
                "attack",
                "--run-dir",
                str(trained_run),
                "--method",
                "cw_r",
                "--no-save-vectors",
                *FAST_CW,
            ],
        )
        assert attack.exit_code == 0, attack.stdout

        result = runner.invoke(
            app,
            [
                "transfer",
                "--run-dir",
                str(trained_run),
                "--source",
                "ridge",
                "--target",
                "ridge",
                "--method",
                "cw_r",
            ],
        )

        assert result.exit_code == 2
        assert "--save-vectors" in result.stdout
