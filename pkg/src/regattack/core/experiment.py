"""Experiment orchestration: split, train, attack and aggregate per unit.

A unit is one subject (within-subject scenario) or one held-out subject
(cross-subject scenario). Units are independent; per-unit metrics are
averaged without weights, in unit order, so the outcome does not depend on
how many workers ran them.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, TypeVar

import numpy as np

from regattack.core.attacks import (
    cw_r_batch,
    derive_seed,
    gaussian_noise_batch,
    ifgsm_r_batch,
    ifgsm_r_grid_batch,
)
from regattack.core.data import (
    Dataset,
    SubjectData,
    split_cross_subject,
    split_within_subject_indices,
)
from regattack.core.evaluation import (
    asr,
    calibrate_noise_sigma,
    mean_output,
    rmse,
    transferability,
)
from regattack.core.exceptions import (
    InputError,
    NumericalError,
    RegAttackError,
    UnitError,
)
from regattack.core.models import (
    AttackMethod,
    AttackResult,
    ExperimentConfig,
    ExperimentReport,
    ModelKind,
    ReportMethod,
    Scenario,
    TransferReport,
    UnitFailure,
)
from regattack.core.regressors import RegressionModel, train_model

logger = logging.getLogger(__name__)

# Seed stream for the noise baseline, kept apart from CW-R's omega init.
NOISE_STREAM = 2

GRADIENT_METHODS: tuple[AttackMethod, ...] = (AttackMethod.CW_R, AttackMethod.IFGSM_R)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True, eq=False)
class ExperimentUnit:
    """Train/test data of one unit."""

    index: int
    unit_id: str
    scenario: Scenario
    train: SubjectData
    test: SubjectData
    train_indices: np.ndarray | None = None
    test_indices: np.ndarray | None = None

    def example_id(self, row: int) -> str:
        """Stable id of a test example: ``<unit>:<row>``."""
        return f"{self.unit_id}:{row}"


@dataclass
class Campaign:
    """Everything one scenario x model run produced."""

    scenario: Scenario
    model_kind: ModelKind
    units: list[ExperimentUnit]
    models: dict[str, RegressionModel] = field(default_factory=dict)
    predictions: dict[str, np.ndarray] = field(default_factory=dict)
    results: dict[AttackMethod, list[AttackResult]] = field(default_factory=dict)
    reports: list[ExperimentReport] = field(default_factory=list)
    failures: list[UnitFailure] = field(default_factory=list)
    sigma: float | None = None

    @property
    def completed_units(self) -> list[ExperimentUnit]:
        """Units that have a trained model, in unit order."""
        return [u for u in self.units if u.unit_id in self.models]

    def add_model(self, unit: ExperimentUnit, model: RegressionModel) -> None:
        """Register a unit's model and its clean test predictions."""
        self.models[unit.unit_id] = model
        self.predictions[unit.unit_id] = np.asarray(model.predict(unit.test.features))


def _map(workers: int, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


# Units


def build_units(
    dataset: Dataset,
    scenario: Scenario,
    train_fraction: float = 0.9,
    seed: int = 0,
) -> list[ExperimentUnit]:
    """Split a dataset into experiment units in subject order.

    Raises:
        InputError: If a subject is too small to split or the cross-subject
            scenario has fewer than two subjects
    """
    units = []
    for index, subject in enumerate(dataset.subjects):
        if scenario is Scenario.WITHIN_SUBJECT:
            train_idx, test_idx = split_within_subject_indices(
                subject.n_samples, train_fraction, derive_seed(seed, index)
            )
            train = SubjectData(
                subject.subject_id,
                subject.features[train_idx],
                subject.targets[train_idx],
            )
            test = SubjectData(
                subject.subject_id,
                subject.features[test_idx],
                subject.targets[test_idx],
            )
            units.append(
                ExperimentUnit(
                    index,
                    subject.subject_id,
                    scenario,
                    train,
                    test,
                    train_idx,
                    test_idx,
                )
            )
        else:
            train, test = split_cross_subject(dataset, subject.subject_id)
            units.append(
                ExperimentUnit(index, subject.subject_id, scenario, train, test)
            )
    return units


def train_unit(
    unit: ExperimentUnit, model_kind: ModelKind, config: ExperimentConfig
) -> RegressionModel:
    """Fit the victim model on the unit's training data."""
    train_config = config.train.model_copy(
        update={"seed": derive_seed(config.train.seed, unit.index)}
    )
    logger.info("Training %s on unit %s", model_kind.value, unit.unit_id)
    return train_model(
        model_kind,
        unit.train.features,
        unit.train.targets,
        ridge_lambda=config.ridge_lambda,
        train_config=train_config,
    )


# Attacks


def _failed_result(
    model: RegressionModel,
    x: np.ndarray,
    method: AttackMethod,
    config: ExperimentConfig,
) -> AttackResult:
    before = float(model.predict(x))
    return AttackResult(
        x_original=x.copy(),
        x_adversarial=x.copy(),
        output_before=before,
        output_after=before,
        t=config.cw.t,
        success=False,
        distortion_l2=0.0,
        distortion_linf=0.0,
        iterations_used=0,
        method=method,
        direction=config.cw.direction,
    )


def _attack_rows(
    model: RegressionModel,
    X: np.ndarray,
    method: AttackMethod,
    config: ExperimentConfig,
    seeds: Sequence[int],
    use_grid: bool,
    sigma: float | None,
) -> list[AttackResult]:
    match method:
        case AttackMethod.CW_R:
            return cw_r_batch(model, X, config.cw, seeds=seeds)
        case AttackMethod.IFGSM_R if use_grid and config.ifgsm.epsilon_grid:
            return ifgsm_r_grid_batch(model, X, config.ifgsm)
        case AttackMethod.IFGSM_R:
            return ifgsm_r_batch(model, X, config.ifgsm)
        case AttackMethod.RANDOM_NOISE if sigma is not None:
            return gaussian_noise_batch(
                model,
                X,
                sigma,
                seeds,
                t=config.cw.t,
                direction=config.cw.direction,
            )
        case _:
            raise InputError(f"{method.value} needs a calibrated sigma")


def attack_unit(
    model: RegressionModel,
    unit: ExperimentUnit,
    method: AttackMethod,
    config: ExperimentConfig,
    use_grid: bool = True,
    sigma: float | None = None,
) -> tuple[list[AttackResult], list[UnitFailure]]:
    """Attack every test example of a unit.

    The batch is attacked in one go; if that hits a NumericalError, each
    example is retried on its own and examples that still fail are recorded
    as unsuccessful results with zero distortion.

    Returns:
        Results in test-row order (tagged with example and unit ids) and the
        per-example failures
    """
    X = unit.test.features
    n = X.shape[0]
    if method is AttackMethod.RANDOM_NOISE:
        seeds = [
            derive_seed(config.seed, unit.index, row, NOISE_STREAM) for row in range(n)
        ]
    else:
        seeds = [derive_seed(config.cw.seed, unit.index, row) for row in range(n)]

    failures: list[UnitFailure] = []
    try:
        results = _attack_rows(model, X, method, config, seeds, use_grid, sigma)
    except NumericalError as e:
        logger.warning(
            "%s on unit %s failed as a batch (%s); retrying per example",
            method.value,
            unit.unit_id,
            e,
        )
        results = []
        for row in range(n):
            try:
                results.extend(
                    _attack_rows(
                        model,
                        X[row : row + 1],
                        method,
                        config,
                        seeds[row : row + 1],
                        use_grid,
                        sigma,
                    )
                )
            except NumericalError as row_error:
                logger.warning(
                    "%s failed on %s: %s", method.value, unit.example_id(row), row_error
                )
                failures.append(
                    UnitFailure(
                        unit_id=unit.example_id(row),
                        stage=method.value,
                        error=str(row_error),
                    )
                )
                results.append(_failed_result(model, X[row], method, config))

    tagged = [
        result.with_ids(unit.example_id(row), unit.unit_id)
        for row, result in enumerate(results)
    ]
    logger.info(
        "%s on unit %s: %d/%d successful",
        method.value,
        unit.unit_id,
        sum(r.success for r in tagged),
        n,
    )
    return tagged, failures


# Reports


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values))


def baseline_report(
    scenario: Scenario,
    dataset_id: str,
    model_kind: ModelKind,
    units: Sequence[ExperimentUnit],
    predictions: Sequence[np.ndarray],
    snapshot: dict[str, Any] | None = None,
) -> ExperimentReport:
    """RMSE and mean output on clean test data, averaged over units."""
    if not units:
        raise InputError("No completed units to report on")
    return ExperimentReport(
        scenario=scenario,
        dataset_id=dataset_id,
        model_kind=model_kind,
        method=ReportMethod.BASELINE,
        rmse=_mean(
            [rmse(p, u.test.targets) for u, p in zip(units, predictions, strict=True)]
        ),
        mean_output=_mean([mean_output(p) for p in predictions]),
        n_examples=sum(u.test.n_samples for u in units),
        config_snapshot=snapshot or {},
    )


def attack_report(
    scenario: Scenario,
    dataset_id: str,
    model_kind: ModelKind,
    method: AttackMethod,
    units: Sequence[ExperimentUnit],
    results: Sequence[Sequence[AttackResult]],
    snapshot: dict[str, Any] | None = None,
) -> ExperimentReport:
    """One attack row: RMSE of adversarial outputs against the true targets,
    post-attack mean output, ASR and mean L2 distortion, averaged over units.
    """
    if not units:
        raise InputError("No completed units to report on")
    rmses, outputs, rates, distortions = [], [], [], []
    for unit, unit_results in zip(units, results, strict=True):
        after = np.array([r.output_after for r in unit_results])
        rmses.append(rmse(after, unit.test.targets))
        outputs.append(mean_output(after))
        rates.append(asr(unit_results))
        distortions.append(_mean([r.distortion_l2 for r in unit_results]))
    return ExperimentReport(
        scenario=scenario,
        dataset_id=dataset_id,
        model_kind=model_kind,
        method=ReportMethod(method.value),
        rmse=_mean(rmses),
        mean_output=_mean(outputs),
        asr=_mean(rates),
        mean_distortion=_mean(distortions),
        n_examples=sum(len(r) for r in results),
        config_snapshot=snapshot or {},
    )


def split_by_unit(
    results: Sequence[AttackResult], units: Sequence[ExperimentUnit]
) -> list[list[AttackResult]]:
    """Group flat results by unit, following the order of ``units``.

    Raises:
        InputError: If a unit has no results
    """
    grouped: dict[str, list[AttackResult]] = {}
    for result in results:
        grouped.setdefault(result.unit_id, []).append(result)
    missing = [u.unit_id for u in units if u.unit_id not in grouped]
    if missing:
        raise InputError(f"No results for units: {', '.join(missing)}")
    return [grouped[u.unit_id] for u in units]


# Campaigns


def _ordered_methods(
    methods: Sequence[ReportMethod | AttackMethod],
) -> list[ReportMethod]:
    requested = {ReportMethod(m.value) for m in methods}
    if not requested:
        raise InputError("No methods requested")
    return [m for m in ReportMethod if m in requested]


def train_campaign(
    dataset: Dataset,
    scenario: Scenario,
    model_kind: ModelKind,
    config: ExperimentConfig | None = None,
) -> Campaign:
    """Split the dataset and fit one model per unit.

    Units whose training fails are recorded in ``failures`` and get no model.

    Raises:
        InputError: If the dataset is not normalized
    """
    config = config or ExperimentConfig()
    if dataset.normalization is None:
        raise InputError(f"Dataset {dataset.dataset_id} must be normalized first")
    units = build_units(dataset, scenario, config.train_fraction, config.seed)
    campaign = Campaign(scenario=scenario, model_kind=model_kind, units=units)

    def fit(unit: ExperimentUnit) -> RegressionModel | UnitFailure:
        try:
            return train_unit(unit, model_kind, config)
        except RegAttackError as e:
            logger.warning("Training failed on unit %s: %s", unit.unit_id, e)
            return UnitFailure(unit_id=unit.unit_id, stage="train", error=str(e))

    for unit, outcome in zip(units, _map(config.workers, fit, units), strict=True):
        if isinstance(outcome, UnitFailure):
            campaign.failures.append(outcome)
        else:
            campaign.add_model(unit, outcome)
    return campaign


def attack_campaign(
    campaign: Campaign,
    methods: Sequence[AttackMethod],
    config: ExperimentConfig | None = None,
    use_grid: bool = True,
    calibration: Sequence[AttackResult] = (),
) -> Campaign:
    """Attack the test examples of every unit that has a model.

    Gradient attacks run first; the noise baseline then uses one sigma
    calibrated on the union of their results and ``calibration`` (results of
    earlier gradient attacks on the same run).

    Raises:
        InputError: If random_noise is requested without any gradient results
    """
    config = config or ExperimentConfig()
    done = campaign.completed_units
    if not done:
        return campaign
    gradient = [m for m in GRADIENT_METHODS if m in methods]

    def run_gradient(
        unit: ExperimentUnit,
    ) -> tuple[dict[AttackMethod, list[AttackResult]], list[UnitFailure]]:
        per_method: dict[AttackMethod, list[AttackResult]] = {}
        failures: list[UnitFailure] = []
        for method in gradient:
            results, failed = attack_unit(
                campaign.models[unit.unit_id], unit, method, config, use_grid
            )
            per_method[method] = results
            failures.extend(failed)
        return per_method, failures

    if gradient:
        for per_method, failures in _map(config.workers, run_gradient, done):
            for method, results in per_method.items():
                campaign.results.setdefault(method, []).extend(results)
            campaign.failures.extend(failures)

    if AttackMethod.RANDOM_NOISE in methods:
        union = [*calibration, *(r for m in gradient for r in campaign.results[m])]
        if not union:
            raise InputError("random_noise needs cw_r or ifgsm_r results to calibrate")
        sigma = calibrate_noise_sigma(union, done[0].test.features.shape[1])
        campaign.sigma = sigma
        logger.info("Noise sigma calibrated to %.6g", sigma)

        def run_noise(
            unit: ExperimentUnit,
        ) -> tuple[list[AttackResult], list[UnitFailure]]:
            return attack_unit(
                campaign.models[unit.unit_id],
                unit,
                AttackMethod.RANDOM_NOISE,
                config,
                use_grid,
                sigma=sigma,
            )

        for results, failures in _map(config.workers, run_noise, done):
            campaign.results.setdefault(AttackMethod.RANDOM_NOISE, []).extend(results)
            campaign.failures.extend(failures)
    return campaign


def build_reports(
    campaign: Campaign,
    dataset_id: str,
    methods: Sequence[ReportMethod | AttackMethod],
    snapshot: dict[str, Any] | None = None,
) -> list[ExperimentReport]:
    """One report per requested method, over the units that have a model."""
    done = campaign.completed_units
    if not done:
        return []
    reports = []
    for method in _ordered_methods(methods):
        if method is ReportMethod.BASELINE:
            report = baseline_report(
                campaign.scenario,
                dataset_id,
                campaign.model_kind,
                done,
                [campaign.predictions[u.unit_id] for u in done],
                snapshot,
            )
        else:
            attack_method = AttackMethod(method.value)
            report = attack_report(
                campaign.scenario,
                dataset_id,
                campaign.model_kind,
                attack_method,
                done,
                split_by_unit(campaign.results.get(attack_method, []), done),
                snapshot,
            )
        reports.append(report)
    return reports


def run_campaign(
    dataset: Dataset,
    scenario: Scenario,
    model_kind: ModelKind,
    methods: Sequence[ReportMethod | AttackMethod],
    config: ExperimentConfig | None = None,
    use_grid: bool = True,
    snapshot: dict[str, Any] | None = None,
) -> Campaign:
    """Train, attack and report on one scenario x model.

    Units whose training fails are skipped and recorded; per-example attack
    failures count as unsuccessful examples.

    Raises:
        InputError: If the dataset is not normalized or methods are invalid
    """
    config = config or ExperimentConfig()
    ordered = _ordered_methods(methods)
    if ReportMethod.RANDOM_NOISE in ordered and not (
        {ReportMethod.CW_R, ReportMethod.IFGSM_R} & set(ordered)
    ):
        raise InputError("random_noise needs cw_r or ifgsm_r results to calibrate")
    snapshot = snapshot if snapshot is not None else config.model_dump(mode="json")
    campaign = train_campaign(dataset, scenario, model_kind, config)
    attacks = [AttackMethod(m.value) for m in ordered if m is not ReportMethod.BASELINE]
    attack_campaign(campaign, attacks, config, use_grid)
    campaign.reports = build_reports(campaign, dataset.dataset_id, ordered, snapshot)
    return campaign


def run_experiment(
    dataset: Dataset,
    scenario: Scenario,
    model_kind: ModelKind,
    methods: Sequence[ReportMethod | AttackMethod],
    config: ExperimentConfig | None = None,
    use_grid: bool = True,
) -> list[ExperimentReport]:
    """Report rows for one scenario x model, one per requested method.

    Raises:
        UnitError: If training failed on any unit
        InputError: If the dataset is not normalized or methods are invalid
    """
    campaign = run_campaign(dataset, scenario, model_kind, methods, config, use_grid)
    for failure in campaign.failures:
        if failure.stage == "train":
            raise UnitError(failure.unit_id, failure.stage, failure.error)
    return campaign.reports


# Transfer


def transfer_units(
    results: Sequence[AttackResult],
    target_models: dict[str, RegressionModel],
    source_kind: ModelKind,
) -> TransferReport:
    """Transfer each unit's examples to that unit's target model and average.

    Raises:
        InputError: If results are empty or a unit has no target model
    """
    if not results:
        raise InputError("No attack results to transfer")
    grouped: dict[str, list[AttackResult]] = {}
    for result in results:
        grouped.setdefault(result.unit_id, []).append(result)
    missing = sorted(set(grouped) - set(target_models))
    if missing:
        raise InputError(f"No target model for units: {', '.join(missing)}")

    per_unit = [
        transferability(unit_results, target_models[unit_id], source_kind=source_kind)
        for unit_id, unit_results in grouped.items()
    ]
    first = per_unit[0]
    return TransferReport(
        source_model=source_kind,
        target_model=first.target_model,
        method=first.method,
        mean_output_source=_mean([r.mean_output_source for r in per_unit]),
        mean_output_target=_mean([r.mean_output_target for r in per_unit]),
        mean_output_target_original=_mean(
            [r.mean_output_target_original or 0.0 for r in per_unit]
        ),
        asr_on_target=_mean([r.asr_on_target for r in per_unit]),
        n_examples=sum(r.n_examples for r in per_unit),
    )
