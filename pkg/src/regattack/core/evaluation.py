"""Metrics: RMSE, mean output, attack success rate, noise calibration, transfer."""

import logging
import math
from collections.abc import Sequence

import numpy as np

from regattack.core.exceptions import InputError
from regattack.core.models import (
    AttackResult,
    Direction,
    ModelKind,
    TransferReport,
    is_successful,
)
from regattack.core.regressors import RegressionModel

logger = logging.getLogger(__name__)


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Root mean squared error.

    Raises:
        InputError: If the lengths differ or the vectors are empty
    """
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    true = np.asarray(targets, dtype=np.float64).ravel()
    if pred.shape != true.shape:
        raise InputError(
            f"Length mismatch: {pred.size} predictions, {true.size} targets"
        )
    if pred.size == 0:
        raise InputError("rmse needs at least one prediction")
    return float(np.sqrt(np.mean((pred - true) ** 2)))


def mean_output(predictions: np.ndarray) -> float:
    """Arithmetic mean of the model outputs."""
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    if pred.size == 0:
        raise InputError("mean_output needs at least one prediction")
    return float(np.mean(pred))


def _shared_target(results: Sequence[AttackResult]) -> tuple[float, Direction]:
    if not results:
        raise InputError("Need at least one attack result")
    t = results[0].t
    direction = results[0].direction
    for result in results[1:]:
        if result.t != t:
            raise InputError(f"Results mix target shifts {t} and {result.t}")
        if result.direction is not direction:
            raise InputError("Results mix attack directions")
    return t, direction


def asr(results: Sequence[AttackResult], t: float | None = None) -> float:
    """Fraction of results whose success flag is set.

    Args:
        results: Attack results sharing one target shift
        t: Expected target shift; checked against the results when given

    Raises:
        InputError: If results is empty or mixes target shifts
    """
    shared, _ = _shared_target(results)
    if t is not None and t != shared:
        raise InputError(f"Results were produced for t={shared}, not t={t}")
    return sum(result.success for result in results) / len(results)


def calibrate_noise_sigma(
    attack_results: Sequence[AttackResult], feature_dim: int
) -> float:
    """sigma = d_max / sqrt(k), so E||eta||_2 is about the largest L2 distortion.

    Raises:
        InputError: If attack_results is empty or feature_dim is not positive
    """
    if not attack_results:
        raise InputError("Noise calibration needs gradient-attack results")
    if feature_dim < 1:
        raise InputError(f"feature_dim must be positive, got {feature_dim}")
    d_max = max(result.distortion_l2 for result in attack_results)
    return d_max / math.sqrt(feature_dim)


def transferability(
    source_results: Sequence[AttackResult],
    target_model: RegressionModel,
    t: float | None = None,
    *,
    source_kind: ModelKind | None = None,
) -> TransferReport:
    """Replay adversarial vectors against another model.

    Success on the target is judged against the target model's own
    predictions on the original vectors.

    Args:
        source_results: Results holding full x_original / x_adversarial vectors
        target_model: Model the examples are transferred to
        t: Target shift (defaults to the results' shared t)
        source_kind: ModelKind of the model the examples were crafted on;
            defaults to the target's kind

    Raises:
        InputError: If results are empty, mix t, or do not match the target's
            feature dimension
    """
    shared, direction = _shared_target(source_results)
    t = shared if t is None else t
    originals = np.stack([r.x_original for r in source_results])
    adversarials = np.stack([r.x_adversarial for r in source_results])
    if originals.shape[1] != target_model.feature_dim:
        raise InputError(
            f"Stored vectors have {originals.shape[1]} features, "
            f"target model expects {target_model.feature_dim}"
        )

    # Evaluate unit by unit so each batch matches the one the attack saw.
    before = np.empty(len(source_results))
    after = np.empty(len(source_results))
    units: dict[str, list[int]] = {}
    for i, result in enumerate(source_results):
        units.setdefault(result.unit_id, []).append(i)
    for rows in units.values():
        before[rows] = target_model.predict(originals[rows])
        after[rows] = target_model.predict(adversarials[rows])
    success = is_successful(before, after, t, direction)

    methods = {r.method for r in source_results}
    report = TransferReport(
        source_model=source_kind if source_kind is not None else target_model.kind,
        target_model=target_model.kind,
        method=methods.pop() if len(methods) == 1 else None,
        mean_output_source=float(np.mean([r.output_after for r in source_results])),
        mean_output_target=mean_output(after),
        mean_output_target_original=mean_output(before),
        asr_on_target=float(np.mean(success)),
        n_examples=len(source_results),
    )
    logger.info(
        "Transfer %s -> %s: ASR %.4f over %d examples",
        report.source_model.value,
        report.target_model.value,
        report.asr_on_target,
        report.n_examples,
    )
    return report
