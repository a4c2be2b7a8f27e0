"""Typer CLI application."""

import logging
import shutil
from pathlib import Path
from typing import Annotated, Any, NoReturn

import typer
from rich.console import Console
from rich.logging import RichHandler

from regattack import __version__
from regattack.core.config import (
    ConfigValidationError,
    generate_config,
    get_default_config_path,
    load_run_config,
    read_config_file,
    resolve_path,
    snapshot_path,
    write_snapshot,
)
from regattack.core.data import (
    Dataset,
    load_dataset,
    normalize_features,
    save_dataset,
    synthesize_dataset,
)
from regattack.core.exceptions import ArtifactError, InputError, RegAttackError
from regattack.core.experiment import (
    GRADIENT_METHODS,
    Campaign,
    attack_campaign,
    build_reports,
    build_units,
    train_campaign,
    transfer_units,
)
from regattack.core.models import (
    Activation,
    AttackMethod,
    AttackResult,
    Direction,
    ExperimentReport,
    ModelKind,
    ReportMethod,
    RunConfig,
    Scenario,
    TransferReport,
    UnitFailure,
)
from regattack.core.regressors import RegressionModel, load_model, save_model
from regattack.core.reports import (
    load_reports,
    load_results,
    render_report_table,
    render_transfer_table,
    save_failures,
    save_json,
    save_reports,
    save_results,
    save_transfer_reports,
)

app = typer.Typer(
    name="regattack",
    help="White-box target adversarial attacks on regression models.",
    no_args_is_help=True,
)

# Run directory layout
MODELS_DIR = "models"
RESULTS_DIR = "results"
REPORTS_DIR = "reports"
TRANSFER_DIR = "transfer"
SPLITS_FILE = "splits.json"
ERRORS_FILE = "errors.json"
REPORT_STEM = "report"

console = Console()
logger = logging.getLogger(__name__)


def experiment_dir(run_dir: Path, scenario: Scenario, model_kind: ModelKind) -> Path:
    """Directory of one scenario x model inside a run."""
    return run_dir / scenario.value / model_kind.value


def _fail(message: str, code: int = 1) -> NoReturn:
    console.print(f"[red]Error:[/red] {message}")
    raise typer.Exit(code=code)


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        typer.echo(f"regattack {__version__}")
        raise typer.Exit()


@app.callback()
def callback(
    version: Annotated[
        bool | None,
        typer.Option(
            "--version",
            "-V",
            callback=version_callback,
            is_eager=True,
            help="Show version and exit.",
        ),
    ] = None,
    verbose: Annotated[
        bool,
        typer.Option("--verbose", "-v", help="Log progress to stderr."),
    ] = False,
) -> None:
    """White-box target adversarial attacks on regression models."""
    if verbose:
        logging.basicConfig(
            level=logging.INFO,
            format="%(message)s",
            handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
            force=True,
        )


# Shared helpers


def _load_config(
    config_file: Path | None,
    overrides: dict[str, Any],
    base: dict[str, Any] | None = None,
) -> RunConfig:
    try:
        return load_run_config(path=config_file, overrides=overrides, base=base)
    except FileNotFoundError as e:
        _fail(str(e))
    except ConfigValidationError as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(code=1) from None


def _load_run(
    run_dir: Path, config_file: Path | None, overrides: dict[str, Any]
) -> RunConfig:
    snapshot = snapshot_path(run_dir)
    if not snapshot.exists():
        _fail(f"No {snapshot.name} in {run_dir}. Run 'regattack train' first.")
    try:
        base = read_config_file(snapshot)
    except ConfigValidationError as e:
        _fail(str(e))
    return _load_config(config_file, overrides, base=base)


def _load_dataset(run_config: RunConfig) -> Dataset:
    if run_config.dataset is None:
        _fail("No dataset configured.")
    try:
        dataset = load_dataset(run_config.dataset)
        if dataset.normalization is None:
            logger.info("Normalizing %s", run_config.dataset)
            dataset = normalize_features(dataset)
    except RegAttackError as e:
        _fail(str(e))
    return dataset


def _context(
    failures: list[UnitFailure], scenario: Scenario, model_kind: ModelKind
) -> list[UnitFailure]:
    prefix = f"{scenario.value}/{model_kind.value}/"
    return [
        UnitFailure(unit_id=prefix + f.unit_id, stage=f.stage, error=f.error)
        for f in failures
    ]


def _finish(run_dir: Path, failures: list[UnitFailure]) -> None:
    errors_path = run_dir / ERRORS_FILE
    if not failures:
        errors_path.unlink(missing_ok=True)
        return
    save_failures(failures, errors_path)
    console.print(
        f"[red]Error:[/red] {len(failures)} unit(s) or example(s) failed. "
        f"See {errors_path}"
    )
    raise typer.Exit(code=1)


def _load_models(directory: Path) -> dict[str, RegressionModel]:
    return {path.stem: load_model(path) for path in sorted(directory.glob("*.json"))}


def _restore_campaign(
    dataset: Dataset, scenario: Scenario, model_kind: ModelKind, run_config: RunConfig
) -> Campaign:
    assert run_config.run_dir is not None
    out = experiment_dir(run_config.run_dir, scenario, model_kind)
    experiment = run_config.experiment
    try:
        units = build_units(
            dataset, scenario, experiment.train_fraction, experiment.seed
        )
        models = _load_models(out / MODELS_DIR)
    except RegAttackError as e:
        _fail(str(e))
    if not models:
        _fail(f"No trained models in {out / MODELS_DIR}. Run 'regattack train' first.")

    campaign = Campaign(scenario=scenario, model_kind=model_kind, units=units)
    for unit in units:
        model = models.get(unit.unit_id)
        if model is None:
            campaign.failures.append(
                UnitFailure(unit_id=unit.unit_id, stage="load_model", error="no model")
            )
        elif model.kind is not model_kind:
            _fail(f"{out / MODELS_DIR / unit.unit_id}.json is not a {model_kind.value}")
        else:
            campaign.add_model(unit, model)
    return campaign


def _calibration_results(out: Path) -> list[AttackResult]:
    results: list[AttackResult] = []
    for method in GRADIENT_METHODS:
        path = out / RESULTS_DIR / f"{method.value}.csv"
        if path.exists():
            results.extend(load_results(path))
    return results


def _save_splits(campaign: Campaign, path: Path) -> None:
    splits: dict[str, Any] = {}
    for unit in campaign.units:
        if unit.train_indices is not None and unit.test_indices is not None:
            splits[unit.unit_id] = {
                "train": unit.train_indices.tolist(),
                "test": unit.test_indices.tolist(),
            }
        else:
            splits[unit.unit_id] = {"test_subject": unit.unit_id}
    save_json(splits, path)


# Commands


@app.command()
def init(
    path: Annotated[
        Path | None,
        typer.Option("--path", "-p", help="Where to write the config file."),
    ] = None,
    force: Annotated[
        bool,
        typer.Option(
            "--force",
            "-f",
            help="Overwrite an existing configuration file.",
        ),
    ] = False,
) -> None:
    """Write config.toml with every default spelled out.

    The file is created in an XDG Base Directory compliant location unless
    --path is given:
    - $XDG_CONFIG_HOME/regattack/ (if XDG_CONFIG_HOME is set)
    - ~/.config/regattack/ (default)
    """
    target = path or get_default_config_path()
    try:
        config_path = generate_config(path=target, force=force)
    except FileExistsError:
        console.print(
            f"[red]Error:[/red] {target.name} already exists. Use --force to overwrite."
        )
        raise typer.Exit(code=1) from None
    console.print(f"✓ Created {config_path}", style="green")


@app.command()
def synth(
    output: Annotated[Path, typer.Argument(help="CSV file to write.")],
    subjects: Annotated[
        int | None, typer.Option("--subjects", min=1, help="Number of subjects.")
    ] = None,
    samples: Annotated[
        int | None, typer.Option("--samples", min=1, help="Samples per subject.")
    ] = None,
    features: Annotated[
        int | None, typer.Option("--features", min=1, help="Feature dimension.")
    ] = None,
    shift: Annotated[
        float | None,
        typer.Option("--shift", min=0.0, help="Scale of per-subject differences."),
    ] = None,
    noise: Annotated[
        float | None, typer.Option("--noise", min=0.0, help="Target noise scale.")
    ] = None,
    seed: Annotated[int | None, typer.Option("--seed", min=0)] = None,
    config_file: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="TOML or JSON config file."),
    ] = None,
) -> None:
    """Generate a synthetic multi-subject dataset (CSV plus .meta.json)."""
    run_config = _load_config(
        config_file,
        {
            "synth.n_subjects": subjects,
            "synth.samples_per_subject": samples,
            "synth.feature_dim": features,
            "synth.subject_shift_scale": shift,
            "synth.noise_scale": noise,
            "synth.seed": seed,
        },
    )
    spec = run_config.synth
    dataset = synthesize_dataset(spec)
    try:
        sidecar = save_dataset(dataset, output)
    except ArtifactError as e:
        _fail(str(e))
    console.print(
        f"✓ Wrote {spec.n_subjects} subjects x {spec.samples_per_subject} samples "
        f"x {spec.feature_dim} features to {output}",
        style="green",
    )
    console.print(f"  Spec and normalization: {sidecar}")


@app.command()
def train(
    dataset: Annotated[Path, typer.Argument(help="Dataset CSV.")],
    run_dir: Annotated[
        Path, typer.Option("--run-dir", "-o", help="Output directory of the run.")
    ],
    scenario: Annotated[
        list[Scenario] | None,
        typer.Option("--scenario", "-s", help="Repeat for several scenarios."),
    ] = None,
    model: Annotated[
        list[ModelKind] | None,
        typer.Option("--model", "-m", help="Repeat for several model kinds."),
    ] = None,
    ridge_lambda: Annotated[
        float | None, typer.Option("--ridge-lambda", min=0.0)
    ] = None,
    train_fraction: Annotated[
        float | None,
        typer.Option("--train-fraction", help="Within-subject training share."),
    ] = None,
    hidden: Annotated[
        list[int] | None,
        typer.Option("--hidden", help="MLP hidden layer width; repeat per layer."),
    ] = None,
    activation: Annotated[Activation | None, typer.Option("--activation")] = None,
    max_epochs: Annotated[int | None, typer.Option("--max-epochs", min=1)] = None,
    seed: Annotated[int | None, typer.Option("--seed", min=0)] = None,
    workers: Annotated[int | None, typer.Option("--workers", "-w", min=1)] = None,
    config_file: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="TOML or JSON config file."),
    ] = None,
) -> None:
    """Train one model per unit and write the baseline report."""
    run_config = _load_config(
        config_file,
        {
            "dataset": str(resolve_path(dataset)),
            "run_dir": str(resolve_path(run_dir)),
            "scenarios": scenario or None,
            "model_kinds": model or None,
            "experiment.ridge_lambda": ridge_lambda,
            "experiment.train_fraction": train_fraction,
            "experiment.seed": seed,
            "experiment.workers": workers,
            "experiment.train.hidden_sizes": hidden or None,
            "experiment.train.activation": activation,
            "experiment.train.max_epochs": max_epochs,
        },
    )
    assert run_config.run_dir is not None
    data = _load_dataset(run_config)
    write_snapshot(run_config, run_config.run_dir)
    snapshot = run_config.model_dump(mode="json")

    reports: list[ExperimentReport] = []
    failures: list[UnitFailure] = []
    for current_scenario in run_config.scenarios:
        for kind in run_config.model_kinds:
            out = experiment_dir(run_config.run_dir, current_scenario, kind)
            try:
                campaign = train_campaign(
                    data, current_scenario, kind, run_config.experiment
                )
            except InputError as e:
                _fail(str(e))
            if campaign.failures:
                failures.extend(_context(campaign.failures, current_scenario, kind))
                shutil.rmtree(out, ignore_errors=True)
                continue
            try:
                for unit_id, unit_model in campaign.models.items():
                    save_model(unit_model, out / MODELS_DIR / f"{unit_id}.json")
                _save_splits(campaign, out / SPLITS_FILE)
                baseline = build_reports(
                    campaign, data.dataset_id, [ReportMethod.BASELINE], snapshot
                )
                save_reports(baseline, out / REPORTS_DIR / ReportMethod.BASELINE.value)
            except ArtifactError as e:
                _fail(str(e))
            reports.extend(baseline)
            console.print(
                f"✓ Trained {len(campaign.models)} {kind.value} model(s) "
                f"for {current_scenario.value}",
                style="green",
            )

    if reports:
        console.print(render_report_table(reports, title="Baseline"))
    _finish(run_config.run_dir, failures)


@app.command()
def attack(
    run_dir: Annotated[
        Path, typer.Option("--run-dir", "-o", help="Run directory from 'train'.")
    ],
    method: Annotated[
        list[AttackMethod] | None,
        typer.Option("--method", "-a", help="Repeat for several methods."),
    ] = None,
    t: Annotated[
        float | None, typer.Option("--t", help="Required output shift.")
    ] = None,
    direction: Annotated[Direction | None, typer.Option("--direction")] = None,
    no_grid: Annotated[
        bool,
        typer.Option("--no-grid", help="IFGSM-R at a single epsilon, no grid search."),
    ] = False,
    save_vectors: Annotated[
        bool | None,
        typer.Option(
            "--save-vectors/--no-save-vectors",
            help="Write original/adversarial vectors next to the results.",
        ),
    ] = None,
    cw_iterations: Annotated[int | None, typer.Option("--cw-iterations", min=1)] = None,
    binary_search_steps: Annotated[
        int | None, typer.Option("--binary-search-steps", min=1)
    ] = None,
    initial_const: Annotated[
        float | None, typer.Option("--initial-const", min=0.0)
    ] = None,
    epsilon: Annotated[float | None, typer.Option("--epsilon", min=0.0)] = None,
    alpha: Annotated[float | None, typer.Option("--alpha", min=0.0)] = None,
    ifgsm_iterations: Annotated[
        int | None, typer.Option("--ifgsm-iterations", min=1)
    ] = None,
    workers: Annotated[int | None, typer.Option("--workers", "-w", min=1)] = None,
    config_file: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="TOML or JSON config file."),
    ] = None,
) -> None:
    """Attack every test example with the trained models of a run."""
    run_config = _load_run(
        run_dir,
        config_file,
        {
            "run_dir": str(resolve_path(run_dir)),
            "methods": method or None,
            "use_grid": False if no_grid else None,
            "save_vectors": save_vectors,
            "experiment.workers": workers,
            "experiment.cw.t": t,
            "experiment.ifgsm.t": t,
            "experiment.cw.direction": direction,
            "experiment.ifgsm.direction": direction,
            "experiment.cw.iterations": cw_iterations,
            "experiment.cw.binary_search_steps": binary_search_steps,
            "experiment.cw.initial_const": initial_const,
            "experiment.ifgsm.epsilon": epsilon,
            "experiment.ifgsm.alpha": alpha,
            "experiment.ifgsm.iterations": ifgsm_iterations,
        },
    )
    assert run_config.run_dir is not None
    data = _load_dataset(run_config)
    write_snapshot(run_config, run_config.run_dir)
    snapshot = run_config.model_dump(mode="json")
    methods = [m for m in AttackMethod if m in run_config.methods]
    gradient_requested = any(m in GRADIENT_METHODS for m in methods)

    reports: list[ExperimentReport] = []
    failures: list[UnitFailure] = []
    for current_scenario in run_config.scenarios:
        for kind in run_config.model_kinds:
            out = experiment_dir(run_config.run_dir, current_scenario, kind)
            campaign = _restore_campaign(data, current_scenario, kind, run_config)
            calibration: list[AttackResult] = []
            if AttackMethod.RANDOM_NOISE in methods and not gradient_requested:
                try:
                    calibration = _calibration_results(out)
                except ArtifactError as e:
                    _fail(str(e))
                if not calibration:
                    _fail(
                        f"random_noise needs cw_r or ifgsm_r results in {out}. "
                        "Run 'regattack attack --method cw_r' first.",
                        code=2,
                    )
            try:
                attack_campaign(
                    campaign,
                    methods,
                    run_config.experiment,
                    run_config.use_grid,
                    calibration,
                )
                for current in methods:
                    save_results(
                        campaign.results.get(current, []),
                        out / RESULTS_DIR / f"{current.value}.csv",
                        run_config.save_vectors,
                    )
                produced = build_reports(campaign, data.dataset_id, methods, snapshot)
                for report in produced:
                    save_reports([report], out / REPORTS_DIR / report.method.value)
            except RegAttackError as e:
                _fail(str(e))
            reports.extend(produced)
            failures.extend(_context(campaign.failures, current_scenario, kind))
            if campaign.sigma is not None:
                console.print(f"  Noise sigma for {out}: {campaign.sigma:.6g}")

    if reports:
        console.print(render_report_table(reports, title="Attacks"))
    _finish(run_config.run_dir, failures)


@app.command()
def evaluate(
    run_dir: Annotated[Path, typer.Option("--run-dir", "-o", help="Run directory.")],
) -> None:
    """Collect every report of a run into report.csv / report.json."""
    run_config = _load_run(run_dir, None, {})
    reports: list[ExperimentReport] = []
    for current_scenario in run_config.scenarios:
        for kind in run_config.model_kinds:
            out = experiment_dir(run_dir, current_scenario, kind) / REPORTS_DIR
            for method in ReportMethod:
                path = out / f"{method.value}.json"
                if not path.exists():
                    continue
                try:
                    reports.extend(load_reports(path))
                except ArtifactError as e:
                    _fail(str(e))
    if not reports:
        _fail(f"No reports in {run_dir}. Run 'regattack train' first.")

    try:
        csv_path, json_path = save_reports(reports, run_dir / REPORT_STEM)
    except ArtifactError as e:
        _fail(str(e))
    console.print(render_report_table(reports, title=f"Run {run_dir.name}"))
    console.print(f"✓ Wrote {csv_path} and {json_path}", style="green")


@app.command()
def transfer(
    run_dir: Annotated[Path, typer.Option("--run-dir", "-o", help="Run directory.")],
    source: Annotated[
        ModelKind, typer.Option("--source", help="Model the examples were made on.")
    ],
    target: Annotated[
        ModelKind, typer.Option("--target", help="Model to replay them against.")
    ],
    scenario: Annotated[
        list[Scenario] | None,
        typer.Option("--scenario", "-s", help="Defaults to the run's scenarios."),
    ] = None,
    method: Annotated[
        list[AttackMethod] | None,
        typer.Option("--method", "-a", help="Defaults to cw_r and ifgsm_r."),
    ] = None,
) -> None:
    """Replay adversarial examples of one model against another."""
    run_config = _load_run(run_dir, None, {})
    methods = method or [
        m for m in GRADIENT_METHODS if m in run_config.methods
    ] or list(GRADIENT_METHODS)
    for current_scenario in scenario or run_config.scenarios:
        source_dir = experiment_dir(run_dir, current_scenario, source)
        target_dir = experiment_dir(run_dir, current_scenario, target)
        try:
            target_models = _load_models(target_dir / MODELS_DIR)
        except ArtifactError as e:
            _fail(str(e))
        if not target_models:
            _fail(f"No {target.value} models in {target_dir}. Train them first.")

        reports: list[TransferReport] = []
        for current in methods:
            path = source_dir / RESULTS_DIR / f"{current.value}.csv"
            if not path.exists():
                _fail(f"No {current.value} results in {source_dir}.", code=2)
            try:
                results = load_results(path, require_vectors=True)
                reports.append(transfer_units(results, target_models, source))
            except (ArtifactError, InputError) as e:
                _fail(str(e), code=2)

        stem = (
            run_dir
            / TRANSFER_DIR
            / f"{current_scenario.value}_{source.value}_to_{target.value}"
        )
        try:
            save_transfer_reports(reports, stem)
        except ArtifactError as e:
            _fail(str(e))
        console.print(render_transfer_table(reports))


def main() -> None:
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
