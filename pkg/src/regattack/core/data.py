"""Datasets: synthetic subjects, CSV files, band-power features, splits."""

import csv
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from scipy.signal import periodogram
from scipy.special import expit

from regattack.core.exceptions import (
    ArtifactError,
    ConstantFeatureError,
    DatasetParseError,
    DatasetSchemaError,
    InputError,
    UnknownSubjectError,
)
from regattack.core.models import NormalizationRecord, SynthSpec

logger = logging.getLogger(__name__)

THETA_BAND: tuple[float, float] = (4.0, 7.0)
ALPHA_BAND: tuple[float, float] = (7.0, 13.0)
DEFAULT_BANDS: tuple[tuple[float, float], ...] = (THETA_BAND, ALPHA_BAND)
BAND_NAMES: tuple[str, ...] = ("theta", "alpha")
PSD_ESTIMATOR = "periodogram(window=boxcar, scaling=density)"

CSV_ID_COLUMNS: tuple[str, str] = ("subject_id", "target")
# Uniform latent features on [-h, h] have unit variance.
LATENT_HALF_WIDTH = math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class SubjectData:
    """Trials of one subject: features (n, k) and targets (n,)."""

    subject_id: str
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise InputError(
                f"Subject {self.subject_id}: features must be (n, k) with n >= 1"
            )
        if targets.shape != (features.shape[0],):
            raise InputError(
                f"Subject {self.subject_id}: {features.shape[0]} rows "
                f"but targets of shape {targets.shape}"
            )
        if not np.all(np.isfinite(targets)):
            raise InputError(f"Subject {self.subject_id}: targets must be finite")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def n_samples(self) -> int:
        """Number of trials."""
        return int(self.features.shape[0])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Multi-subject regression data sharing one feature layout."""

    subjects: tuple[SubjectData, ...]
    feature_names: tuple[str, ...]
    normalization: NormalizationRecord | None = None
    dataset_id: str = "dataset"
    synth_spec: SynthSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not self.subjects:
            raise InputError("Dataset has no subjects")
        k = len(self.feature_names)
        for subject in self.subjects:
            if subject.features.shape[1] != k:
                raise InputError(
                    f"Subject {subject.subject_id} has "
                    f"{subject.features.shape[1]} features, expected {k}"
                )
        ids = self.subject_ids
        if len(set(ids)) != len(ids):
            raise InputError("Subject ids must be unique")

    @property
    def feature_dim(self) -> int:
        """Number of features k."""
        return len(self.feature_names)

    @property
    def subject_ids(self) -> list[str]:
        """Subject ids in dataset order."""
        return [subject.subject_id for subject in self.subjects]

    def subject(self, subject_id: str) -> SubjectData:
        """Look up a subject by id.

        Raises:
            UnknownSubjectError: If the id is not present
        """
        for subject in self.subjects:
            if subject.subject_id == subject_id:
                return subject
        raise UnknownSubjectError(subject_id)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All features and targets concatenated in subject order."""
        features = np.concatenate([s.features for s in self.subjects])
        targets = np.concatenate([s.targets for s in self.subjects])
        return features, targets


def default_feature_names(feature_dim: int) -> list[str]:
    """Channel-major names: ch01_theta, ch01_alpha, ch02_theta, ..."""
    return [
        f"ch{i // len(BAND_NAMES) + 1:02d}_{BAND_NAMES[i % len(BAND_NAMES)]}"
        for i in range(feature_dim)
    ]


# Synthetic data


def synthesize_dataset(spec: SynthSpec | None = None) -> Dataset:
    """Generate a normalized multi-subject dataset.

    Every subject shares a latent weight vector w_base; subject s uses
    w_base plus subject_shift_scale * N(0, I) and a shifted intercept.
    Latent features are uniform on [-sqrt(3), sqrt(3)] (zero mean, unit
    variance), targets are
    sigmoid(w_s . x * weight_scale / sqrt(k) + b_s) plus Gaussian noise,
    clamped to [0, 1]. Features are then min-max normalized over the whole
    dataset.
    """
    spec = spec or SynthSpec()
    rng = np.random.default_rng(spec.seed)
    k = spec.feature_dim
    w_base = rng.standard_normal(k)
    scale = spec.weight_scale / math.sqrt(k)

    raw: list[np.ndarray] = []
    targets: list[np.ndarray] = []
    for _ in range(spec.n_subjects):
        w_subject = w_base + spec.subject_shift_scale * rng.standard_normal(k)
        b_subject = spec.target_bias + spec.subject_shift_scale * rng.standard_normal()
        x_raw = rng.uniform(
            -LATENT_HALF_WIDTH, LATENT_HALF_WIDTH, (spec.samples_per_subject, k)
        )
        noise = spec.noise_scale * rng.standard_normal(spec.samples_per_subject)
        y = expit(scale * (x_raw @ w_subject) + b_subject) + noise
        raw.append(x_raw)
        targets.append(np.clip(y, 0.0, 1.0))

    width = len(str(spec.n_subjects))
    subjects = tuple(
        SubjectData(f"S{i + 1:0{max(width, 2)}d}", x, y)
        for i, (x, y) in enumerate(zip(raw, targets, strict=True))
    )
    dataset = Dataset(
        subjects=subjects,
        feature_names=tuple(default_feature_names(k)),
        dataset_id=f"synthetic-{spec.seed}",
        synth_spec=spec,
    )
    logger.debug(
        "Synthesized %d subjects x %d samples x %d features",
        spec.n_subjects,
        spec.samples_per_subject,
        k,
    )
    return normalize_features(dataset)


# Band power


def _check_bands(
    bands: Sequence[tuple[float, float]], fs: float
) -> list[tuple[float, float]]:
    if fs <= 0:
        raise InputError(f"Sampling rate must be positive, got {fs}")
    if not bands:
        raise InputError("At least one band is required")
    checked = []
    for low, high in bands:
        if not 0 < low < high <= fs / 2:
            raise InputError(
                f"Band ({low}, {high}) Hz is outside (0, {fs / 2}] Hz for fs={fs}"
            )
        checked.append((float(low), float(high)))
    return checked


def extract_band_power(
    raw: np.ndarray,
    fs: float,
    bands: Sequence[tuple[float, float]] = DEFAULT_BANDS,
) -> np.ndarray:
    """Mean periodogram power per channel and band, channel-major.

    Args:
        raw: Pre-cleaned signal, shape (channels, samples)
        fs: Sampling rate in Hz
        bands: (low, high) edges in Hz; a bin f belongs to a band if low <= f < high

    Returns:
        Vector of length channels * len(bands)

    Raises:
        InputError: If a band lies outside the Nyquist range, contains no
            frequency bin, or the signal is shorter than two cycles of the
            lowest band edge
    """
    checked = _check_bands(bands, fs)
    signal = np.asarray(raw, dtype=np.float64)
    if signal.ndim != 2:
        raise InputError(f"Expected (channels, samples), got shape {signal.shape}")
    lowest = min(low for low, _ in checked)
    needed = math.ceil(2 * fs / lowest)
    if signal.shape[1] < needed:
        raise InputError(
            f"Signal has {signal.shape[1]} samples; {needed} needed to resolve "
            f"{lowest} Hz at fs={fs}"
        )

    freqs, psd = periodogram(
        signal, fs=fs, window="boxcar", detrend=False, scaling="density", axis=-1
    )
    columns = []
    for low, high in checked:
        mask = (freqs >= low) & (freqs < high)
        if not mask.any():
            raise InputError(f"Band ({low}, {high}) Hz contains no frequency bin")
        columns.append(psd[:, mask].mean(axis=1))
    return np.stack(columns, axis=1).ravel()


def band_power_features(
    trials: np.ndarray,
    fs: float,
    bands: Sequence[tuple[float, float]] = DEFAULT_BANDS,
    channel_names: Sequence[str] | None = None,
    band_names: Sequence[str] | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Band power for a batch of trials shaped (n, channels, samples).

    Returns:
        Tuple of the (n, channels * len(bands)) feature matrix and the
        matching ``<channel>_<band>`` names
    """
    batch = np.asarray(trials, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[0] < 1:
        raise InputError(f"Expected (trials, channels, samples), got {batch.shape}")
    n_channels = batch.shape[1]
    channels = (
        list(channel_names)
        if channel_names is not None
        else [f"ch{i + 1:02d}" for i in range(n_channels)]
    )
    if len(channels) != n_channels:
        raise InputError(f"Need {n_channels} channel names, got {len(channels)}")
    if band_names is None:
        band_names = (
            BAND_NAMES
            if tuple(bands) == DEFAULT_BANDS
            else [f"{low:g}-{high:g}Hz" for low, high in bands]
        )
    if len(band_names) != len(bands):
        raise InputError(f"Need {len(bands)} band names, got {len(band_names)}")

    features = np.stack([extract_band_power(trial, fs, bands) for trial in batch])
    names = [f"{ch}_{band}" for ch in channels for band in band_names]
    return features, names


# Normalization


def fit_normalization(
    features: np.ndarray, feature_names: Sequence[str] | None = None
) -> NormalizationRecord:
    """Per-feature min/max of a (n, k) matrix.

    Raises:
        ConstantFeatureError: If a column has max == min
    """
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise InputError(f"Expected a non-empty (n, k) matrix, got {matrix.shape}")
    names = (
        list(feature_names)
        if feature_names is not None
        else default_feature_names(matrix.shape[1])
    )
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    for i in np.flatnonzero(hi <= lo):
        raise ConstantFeatureError(names[i], float(lo[i]))
    return NormalizationRecord(minimum=lo.tolist(), maximum=hi.tolist())


def apply_normalization(
    features: np.ndarray, record: NormalizationRecord
) -> np.ndarray:
    """Scale into [0, 1] with a fitted record, clamping out-of-range values."""
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.shape[-1] != len(record.minimum):
        raise InputError(
            f"Record has {len(record.minimum)} features, data has {matrix.shape[-1]}"
        )
    return record.apply(matrix)


def denormalize(features: np.ndarray, record: NormalizationRecord) -> np.ndarray:
    """Map normalized features back to original units."""
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.shape[-1] != len(record.minimum):
        raise InputError(
            f"Record has {len(record.minimum)} features, data has {matrix.shape[-1]}"
        )
    return record.invert(matrix)


def normalize_features(dataset: Dataset) -> Dataset:
    """Fit min-max scaling on all subjects and return the scaled dataset.

    Raises:
        InputError: If the dataset already carries a normalization record
        ConstantFeatureError: If a feature is constant across the dataset
    """
    if dataset.normalization is not None:
        raise InputError(f"Dataset {dataset.dataset_id} is already normalized")
    features, _ = dataset.stacked()
    record = fit_normalization(features, dataset.feature_names)
    subjects = tuple(
        SubjectData(s.subject_id, record.apply(s.features), s.targets)
        for s in dataset.subjects
    )
    return replace(dataset, subjects=subjects, normalization=record)


# Splits


def split_within_subject_indices(
    n_samples: int, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted train/test row indices of a seeded random partition.

    Raises:
        InputError: If either side would be empty
    """
    if not 0 < train_fraction < 1:
        raise InputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = round(train_fraction * n_samples)
    if n_samples < 2 or not 0 < n_train < n_samples:
        raise InputError(
            f"Cannot split {n_samples} samples with train_fraction={train_fraction}"
        )
    order = np.random.default_rng(seed).permutation(n_samples)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def split_within_subject(
    subject: SubjectData, train_fraction: float, seed: int
) -> tuple[SubjectData, SubjectData]:
    """Random train/test partition of one subject's trials."""
    train_idx, test_idx = split_within_subject_indices(
        subject.n_samples, train_fraction, seed
    )
    train = SubjectData(
        subject.subject_id, subject.features[train_idx], subject.targets[train_idx]
    )
    test = SubjectData(
        subject.subject_id, subject.features[test_idx], subject.targets[test_idx]
    )
    return train, test


def split_cross_subject(
    dataset: Dataset, test_subject: str
) -> tuple[SubjectData, SubjectData]:
    """Leave one subject out: test is that subject, train is everyone else.

    Raises:
        UnknownSubjectError: If test_subject is not in the dataset
        InputError: If the dataset has fewer than two subjects
    """
    test = dataset.subject(test_subject)
    if len(dataset.subjects) < 2:
        raise InputError("Cross-subject split needs at least two subjects")
    rest = [s for s in dataset.subjects if s.subject_id != test_subject]
    train = SubjectData(
        f"all_but_{test_subject}",
        np.concatenate([s.features for s in rest]),
        np.concatenate([s.targets for s in rest]),
    )
    return train, test


# CSV files


def _parse_float(text: str, column: str, line: int, path: Path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetParseError(
            f"column '{column}': '{text}' is not a number", line, path
        ) from None
    if not math.isfinite(value):
        raise DatasetParseError(f"column '{column}': non-finite value", line, path)
    return value


def load_csv(path: Path) -> Dataset:
    """Read ``subject_id,target,<features...>`` rows grouped by subject.

    Subjects keep their order of first appearance.

    Raises:
        ArtifactError: If the file cannot be read
        DatasetParseError: If a value is not a finite number
        DatasetSchemaError: If the header or a row has the wrong layout
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Cannot read dataset {path}: {e}", path) from e

    rows = csv.reader(text.splitlines())
    header = next(rows, None)
    if header is None:
        raise DatasetSchemaError("empty file", 1, path)
    if tuple(header[:2]) != CSV_ID_COLUMNS or len(header) < 3:
        raise DatasetSchemaError(
            "header must be 'subject_id,target,<feature columns...>'", 1, path
        )
    feature_names = header[2:]

    grouped: dict[str, tuple[list[list[float]], list[float]]] = {}
    for line, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetSchemaError(
                f"expected {len(header)} columns, got {len(row)}", line, path
            )
        subject_id = row[0].strip()
        if not subject_id:
            raise DatasetParseError("empty subject_id", line, path)
        target = _parse_float(row[1], "target", line, path)
        values = [
            _parse_float(cell, name, line, path)
            for cell, name in zip(row[2:], feature_names, strict=True)
        ]
        features, targets = grouped.setdefault(subject_id, ([], []))
        features.append(values)
        targets.append(target)

    if not grouped:
        raise DatasetSchemaError("no data rows", 2, path)
    subjects = tuple(
        SubjectData(sid, np.array(features), np.array(targets))
        for sid, (features, targets) in grouped.items()
    )
    return Dataset(
        subjects=subjects, feature_names=tuple(feature_names), dataset_id=path.stem
    )


def save_csv(dataset: Dataset, path: Path) -> None:
    """Write the dataset as CSV with shortest round-trip float repr."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([*CSV_ID_COLUMNS, *dataset.feature_names])
            for subject in dataset.subjects:
                for x, y in zip(subject.features, subject.targets, strict=True):
                    writer.writerow(
                        [subject.subject_id, repr(float(y)), *map(repr, x.tolist())]
                    )
    except OSError as e:
        raise ArtifactError(f"Cannot write dataset {path}: {e}", path) from e


def metadata_path(path: Path) -> Path:
    """JSON sidecar next to a dataset CSV: data.csv -> data.meta.json."""
    return path.with_suffix(".meta.json")


def save_dataset(dataset: Dataset, path: Path) -> Path:
    """Write the CSV plus a JSON sidecar with normalization and synth spec.

    Returns:
        Path to the sidecar
    """
    save_csv(dataset, path)
    meta = {
        "dataset_id": dataset.dataset_id,
        "feature_dim": dataset.feature_dim,
        "psd_estimator": PSD_ESTIMATOR,
        "normalization": (
            dataset.normalization.model_dump(mode="json")
            if dataset.normalization is not None
            else None
        ),
        "synth_spec": (
            dataset.synth_spec.model_dump(mode="json")
            if dataset.synth_spec is not None
            else None
        ),
    }
    sidecar = metadata_path(path)
    try:
        sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Cannot write {sidecar}: {e}", sidecar) from e
    return sidecar


def load_dataset(path: Path) -> Dataset:
    """Load a CSV and, when present, its JSON sidecar.

    Raises:
        ArtifactError: If the sidecar is unreadable or inconsistent
    """
    dataset = load_csv(path)
    sidecar = metadata_path(path)
    if not sidecar.exists():
        return dataset
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        normalization = (
            NormalizationRecord.model_validate(meta["normalization"])
            if meta.get("normalization") is not None
            else None
        )
        synth_spec = (
            SynthSpec.model_validate(meta["synth_spec"])
            if meta.get("synth_spec") is not None
            else None
        )
    except (OSError, json.JSONDecodeError, KeyError, ValidationError) as e:
        raise ArtifactError(f"Invalid dataset metadata {sidecar}: {e}", sidecar) from e

    if normalization is not None and len(normalization.minimum) != dataset.feature_dim:
        raise ArtifactError(
            f"{sidecar}: normalization has {len(normalization.minimum)} features, "
            f"dataset has {dataset.feature_dim}",
            sidecar,
        )
    return replace(
        dataset,
        normalization=normalization,
        dataset_id=meta.get("dataset_id", dataset.dataset_id),
        synth_spec=synth_spec,
    )
