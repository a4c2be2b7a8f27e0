"""Result and report files: CSV, JSON and .npy vector sidecars."""

import csv
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import TypeAdapter, ValidationError
from rich.table import Table

from regattack.core.exceptions import ArtifactError
from regattack.core.models import (
    AttackMethod,
    AttackResult,
    Direction,
    ExperimentReport,
    ReportMethod,
    TransferReport,
    UnitFailure,
)

logger = logging.getLogger(__name__)

RESULT_COLUMNS: tuple[str, ...] = (
    "example_id",
    "unit_id",
    "method",
    "direction",
    "success",
    "output_before",
    "output_after",
    "t",
    "distortion_l2",
    "distortion_linf",
    "iterations_used",
    "epsilon",
    "search_constants",
)
REPORT_COLUMNS: tuple[str, ...] = (
    "scenario",
    "dataset_id",
    "model_kind",
    "method",
    "rmse",
    "mean_output",
    "asr",
    "mean_distortion",
    "n_examples",
)
TRANSFER_COLUMNS: tuple[str, ...] = (
    "source_model",
    "target_model",
    "method",
    "mean_output_source",
    "mean_output_target",
    "mean_output_target_original",
    "asr_on_target",
    "n_examples",
)

_REPORTS = TypeAdapter(list[ExperimentReport])
_TRANSFERS = TypeAdapter(list[TransferReport])
_FAILURES = TypeAdapter(list[UnitFailure])


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _write_csv(
    path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]
) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows([[_cell(v) for v in row] for row in rows])
    except OSError as e:
        raise ArtifactError(f"Failed to write {path}: {e}", path) from e


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write {path}: {e}", path) from e


# Attack results


def vector_paths(path: Path) -> tuple[Path, Path]:
    """Vector sidecars of a results CSV.

    ``cw_r.csv`` has ``cw_r.original.npy`` and ``cw_r.adversarial.npy``.
    """
    return (
        path.with_name(f"{path.stem}.original.npy"),
        path.with_name(f"{path.stem}.adversarial.npy"),
    )


def save_results(
    results: Sequence[AttackResult], path: Path, save_vectors: bool = True
) -> Path:
    """Write attack results to CSV, plus stacked vectors as .npy sidecars.

    Raises:
        ArtifactError: If a file cannot be written
    """
    rows = [
        [
            r.example_id,
            r.unit_id,
            r.method,
            r.direction,
            r.success,
            r.output_before,
            r.output_after,
            r.t,
            r.distortion_l2,
            r.distortion_linf,
            r.iterations_used,
            r.epsilon,
            ";".join(repr(c) for c in r.search_constants),
        ]
        for r in results
    ]
    _write_csv(path, RESULT_COLUMNS, rows)
    original_path, adversarial_path = vector_paths(path)
    if not (save_vectors and results):
        # Stale sidecars from an earlier run.
        original_path.unlink(missing_ok=True)
        adversarial_path.unlink(missing_ok=True)
    else:
        try:
            np.save(original_path, np.stack([r.x_original for r in results]))
            np.save(adversarial_path, np.stack([r.x_adversarial for r in results]))
        except OSError as e:
            raise ArtifactError(f"Failed to write vectors for {path}: {e}", path) from e
    return path


def load_results(path: Path, require_vectors: bool = False) -> list[AttackResult]:
    """Read results written by save_results.

    Without vector sidecars the results carry empty x_original/x_adversarial.

    Raises:
        ArtifactError: If the CSV is missing or malformed, or vectors are
            required but absent or inconsistent
    """
    try:
        with path.open(encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise ArtifactError(f"Cannot read results {path}: {e}", path) from e

    original_path, adversarial_path = vector_paths(path)
    has_vectors = original_path.exists() and adversarial_path.exists()
    if require_vectors and not has_vectors:
        raise ArtifactError(
            f"No adversarial vectors next to {path}; re-run the attack with "
            "vector output enabled (--save-vectors)",
            path,
        )
    empty = np.empty(0)
    originals: np.ndarray | list[np.ndarray] = [empty] * len(rows)
    adversarials: np.ndarray | list[np.ndarray] = [empty] * len(rows)
    if has_vectors:
        try:
            originals = np.load(original_path)
            adversarials = np.load(adversarial_path)
        except (OSError, ValueError) as e:
            raise ArtifactError(f"Cannot read vectors for {path}: {e}", path) from e
        if len(originals) != len(rows) or len(adversarials) != len(rows):
            raise ArtifactError(
                f"Vector sidecars of {path} do not match its rows", path
            )

    results = []
    for i, row in enumerate(rows):
        try:
            results.append(
                AttackResult(
                    x_original=np.asarray(originals[i]),
                    x_adversarial=np.asarray(adversarials[i]),
                    output_before=float(row["output_before"]),
                    output_after=float(row["output_after"]),
                    t=float(row["t"]),
                    success=row["success"] == "true",
                    distortion_l2=float(row["distortion_l2"]),
                    distortion_linf=float(row["distortion_linf"]),
                    iterations_used=int(row["iterations_used"]),
                    method=AttackMethod(row["method"]),
                    direction=Direction(row["direction"]),
                    epsilon=float(row["epsilon"]) if row["epsilon"] else None,
                    search_constants=tuple(
                        float(c) for c in row["search_constants"].split(";") if c
                    ),
                    example_id=row["example_id"],
                    unit_id=row["unit_id"],
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactError(f"{path}: malformed row {i + 2}: {e}", path) from e
    return results


# Experiment and transfer reports


def save_reports(reports: Sequence[ExperimentReport], stem: Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (one row per report) and ``<stem>.json``.

    Only the JSON file carries the config snapshots.
    """
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    _write_csv(
        csv_path,
        REPORT_COLUMNS,
        [[getattr(r, column) for column in REPORT_COLUMNS] for r in reports],
    )
    _write_text(json_path, _REPORTS.dump_json(list(reports), indent=2).decode() + "\n")
    return csv_path, json_path


def load_reports(path: Path) -> list[ExperimentReport]:
    """Read a JSON report file.

    Raises:
        ArtifactError: If the file is missing or malformed
    """
    try:
        return _REPORTS.validate_json(path.read_bytes())
    except OSError as e:
        raise ArtifactError(f"Cannot read report {path}: {e}", path) from e
    except ValidationError as e:
        raise ArtifactError(f"Invalid report {path}: {e}", path) from e


def save_transfer_reports(
    reports: Sequence[TransferReport], stem: Path
) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json`` for transfer reports."""
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    _write_csv(
        csv_path,
        TRANSFER_COLUMNS,
        [[getattr(r, column) for column in TRANSFER_COLUMNS] for r in reports],
    )
    payload = _TRANSFERS.dump_json(list(reports), indent=2).decode()
    _write_text(json_path, payload + "\n")
    return csv_path, json_path


def save_failures(failures: Sequence[UnitFailure], path: Path) -> Path:
    """Write the machine-readable failure summary (errors.json)."""
    payload = {
        "failed": len(failures),
        "failures": _FAILURES.dump_python(list(failures), mode="json"),
    }
    _write_text(path, json.dumps(payload, indent=2) + "\n")
    return path


def save_json(payload: Any, path: Path) -> Path:
    """Write plain JSON (e.g. split indices) with a trailing newline."""
    _write_text(path, json.dumps(payload, indent=2) + "\n")
    return path


# Rendering


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def render_report_table(
    reports: Sequence[ExperimentReport], title: str | None = None
) -> Table:
    """One row per scenario x model x method."""
    table = Table(title=title)
    table.add_column("Scenario")
    table.add_column("Model")
    table.add_column("Method")
    table.add_column("RMSE", justify="right")
    table.add_column("MO", justify="right")
    table.add_column("ASR", justify="right")
    table.add_column("Distortion", justify="right")
    table.add_column("n", justify="right")
    for r in reports:
        table.add_row(
            r.scenario.value,
            r.model_kind.value,
            r.method.value,
            _fmt(r.rmse),
            _fmt(r.mean_output),
            "-" if r.asr is None else f"{r.asr * 100:.2f}%",
            _fmt(r.mean_distortion),
            str(r.n_examples),
            end_section=r.method is ReportMethod.RANDOM_NOISE,
        )
    return table


def render_transfer_table(reports: Sequence[TransferReport]) -> Table:
    """Transfer results: source, target, outputs before/after, ASR."""
    table = Table(title="Transferability")
    table.add_column("Source")
    table.add_column("Target")
    table.add_column("Method")
    table.add_column("MO source", justify="right")
    table.add_column("MO target (clean)", justify="right")
    table.add_column("MO target", justify="right")
    table.add_column("ASR", justify="right")
    for r in reports:
        table.add_row(
            r.source_model.value,
            r.target_model.value,
            r.method.value if r.method is not None else "-",
            _fmt(r.mean_output_source),
            _fmt(r.mean_output_target_original),
            _fmt(r.mean_output_target),
            f"{r.asr_on_target * 100:.2f}%",
        )
    return table
