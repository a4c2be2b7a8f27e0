"""Configuration file handling."""

import json
import os
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pydantic
import tomlkit

from .exceptions import ArtifactError, RegAttackError
from .models import RunConfig

# Constants
APP_NAME = "regattack"
SNAPSHOT_NAME = "run_config.json"


@dataclass
class ValidationError:
    """A single validation error."""

    field: str
    message: str


class ConfigValidationError(RegAttackError):
    """Configuration validation failed."""

    def __init__(self, message: str, errors: list[ValidationError] | None = None):
        super().__init__(message)
        self.errors = errors or []


def get_config_dir() -> Path:
    """Get XDG Base Directory compliant config directory.

    Returns:
        Path to config directory (XDG_CONFIG_HOME/regattack or ~/.config/regattack)
    """
    xdg_config_home = os.environ.get("XDG_CONFIG_HOME", "").strip()
    if xdg_config_home:
        return Path(xdg_config_home) / APP_NAME
    return Path.home() / ".config" / APP_NAME


def get_default_config_path() -> Path:
    """Get default path for config.toml.

    Returns:
        Path to config.toml in config directory
    """
    return get_config_dir() / "config.toml"


def resolve_path(path: str | Path) -> Path:
    """Expand ~ and relative paths to absolute.

    Args:
        path: Path string or Path object

    Returns:
        Absolute Path object
    """
    return Path(path).expanduser().resolve()


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a TOML or JSON config file into a plain dict.

    Files ending in ``.json`` are parsed as JSON, everything else as TOML.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ConfigValidationError: If the file cannot be parsed
    """
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"Invalid JSON in {path}: {e}") from e
    else:
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigValidationError(f"Invalid TOML in {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigValidationError(f"Config root must be a table: {path}")
    return data


def merge_config(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``update`` into a copy of ``base``.

    Keys may be dotted (``"experiment.cw.t"``) to address nested tables.
    """
    merged = dict(base)
    for key, value in update.items():
        head, _, rest = key.partition(".")
        if rest:
            value = {rest: value}
        current = merged.get(head)
        if isinstance(value, dict) and isinstance(current, dict):
            merged[head] = merge_config(current, value)
        elif isinstance(value, dict):
            merged[head] = merge_config({}, value)
        else:
            merged[head] = value
    return merged


def _to_validation_errors(error: pydantic.ValidationError) -> list[ValidationError]:
    return [
        ValidationError(
            field=".".join(str(part) for part in item["loc"]) or "<root>",
            message=item["msg"],
        )
        for item in error.errors()
    ]


def build_run_config(data: dict[str, Any]) -> RunConfig:
    """Validate a config dict.

    Raises:
        ConfigValidationError: With one entry per invalid field
    """
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as e:
        errors = _to_validation_errors(e)
        summary = "; ".join(f"{err.field}: {err.message}" for err in errors)
        raise ConfigValidationError(f"Invalid configuration: {summary}", errors) from e


def load_run_config(
    path: Path | None = None,
    overrides: dict[str, Any] | None = None,
    use_user_config: bool = True,
    base: dict[str, Any] | None = None,
) -> RunConfig:
    """Layer built-in defaults, the user config, a config file and overrides.

    Args:
        path: Explicit config file (TOML or JSON), e.g. a run snapshot
        overrides: Values from command-line flags, possibly dotted keys
        use_user_config: Read XDG_CONFIG_HOME/regattack/config.toml if present
        base: Values applied above the user config and below ``path``

    Returns:
        Validated RunConfig

    Raises:
        FileNotFoundError: If ``path`` doesn't exist
        ConfigValidationError: If any layer is invalid
    """
    data: dict[str, Any] = {}
    user_path = get_default_config_path()
    if use_user_config and user_path.exists():
        data = merge_config(data, read_config_file(user_path))
    if base:
        data = merge_config(data, base)
    if path is not None:
        data = merge_config(data, read_config_file(path))
    if overrides:
        data = merge_config(
            data, {key: value for key, value in overrides.items() if value is not None}
        )
    return build_run_config(data)


def _add_table(container: Any, name: str, values: dict[str, Any]) -> None:
    table = tomlkit.table()
    nested = {k: v for k, v in values.items() if isinstance(v, dict)}
    for key, value in values.items():
        if key not in nested:
            table.add(key, value)
    for key, value in nested.items():
        _add_table(table, key, value)
    container.add(name, table)


def generate_config(path: Path | None = None, force: bool = False) -> Path:
    """Generate config.toml with every default written out.

    Args:
        path: Output path (defaults to XDG_CONFIG_HOME/regattack/config.toml)
        force: Overwrite existing file

    Returns:
        Path to created config file

    Raises:
        FileExistsError: If file exists and force=False
    """
    config_path = path or get_default_config_path()

    if config_path.exists() and not force:
        raise FileExistsError(f"Config file already exists: {config_path}")

    # Create parent directory if it doesn't exist
    config_path.parent.mkdir(parents=True, exist_ok=True)

    defaults = RunConfig().model_dump(mode="json", exclude_none=True)
    doc = tomlkit.document()
    doc.add(tomlkit.comment("regattack defaults; command-line flags override these"))
    doc.add(tomlkit.nl())
    for key, value in defaults.items():
        if not isinstance(value, dict):
            doc.add(key, value)
    for key, value in defaults.items():
        if isinstance(value, dict):
            _add_table(doc, key, value)

    with open(config_path, "w", encoding="utf-8") as f:
        f.write(tomlkit.dumps(doc))

    return config_path


def write_snapshot(config: RunConfig, directory: Path) -> Path:
    """Write ``run_config.json`` into ``directory``.

    Raises:
        ArtifactError: If the file cannot be written
    """
    snapshot = directory / SNAPSHOT_NAME
    try:
        directory.mkdir(parents=True, exist_ok=True)
        snapshot.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write config snapshot: {e}", snapshot) from e
    return snapshot


def snapshot_path(directory: Path) -> Path:
    """Location of the config snapshot inside a run directory."""
    return directory / SNAPSHOT_NAME
