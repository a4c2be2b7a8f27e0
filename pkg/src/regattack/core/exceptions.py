"""Exceptions for regattack."""

from pathlib import Path


class RegAttackError(Exception):
    """Base exception for all regattack errors."""


class InputError(RegAttackError, ValueError):
    """Invalid argument shape, size or value."""


class DegenerateSystemError(RegAttackError):
    """Normal-equation matrix is singular."""

    def __init__(self, message: str, rank: int | None = None) -> None:
        """Initialize DegenerateSystemError.

        Args:
            message: Error message
            rank: Numerical rank of the system matrix if known
        """
        super().__init__(message)
        self.rank = rank


class DivergenceError(RegAttackError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float) -> None:
        """Initialize DivergenceError.

        Args:
            epoch: Epoch (1-based) in which the loss became non-finite
            loss: The offending loss value
        """
        super().__init__(f"Training diverged in epoch {epoch}: loss={loss}")
        self.epoch = epoch
        self.loss = loss


class NumericalError(RegAttackError):
    """Attack loss or gradient became non-finite."""

    def __init__(self, message: str, round_index: int, iteration: int) -> None:
        """Initialize NumericalError.

        Args:
            message: What went non-finite
            round_index: Binary-search round (0 for single-round attacks)
            iteration: Inner iteration within the round
        """
        super().__init__(f"{message} (round {round_index}, iteration {iteration})")
        self.round_index = round_index
        self.iteration = iteration


class UnknownSubjectError(InputError):
    """Subject id is not part of the dataset."""

    def __init__(self, subject_id: str) -> None:
        """Initialize UnknownSubjectError.

        Args:
            subject_id: Subject id that was not found
        """
        super().__init__(f"Unknown subject: {subject_id}")
        self.subject_id = subject_id


class ConstantFeatureError(InputError):
    """A feature column has no spread and cannot be min-max scaled."""

    def __init__(self, feature: str, value: float) -> None:
        """Initialize ConstantFeatureError.

        Args:
            feature: Name of the constant feature
            value: The constant value
        """
        super().__init__(f"Feature '{feature}' is constant ({value}); cannot normalize")
        self.feature = feature
        self.value = value


class DatasetParseError(RegAttackError):
    """A dataset row could not be parsed."""

    def __init__(self, message: str, line: int, path: Path | None = None) -> None:
        """Initialize DatasetParseError.

        Args:
            message: Error message
            line: 1-based line number in the file
            path: Path to the dataset file
        """
        location = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{location}: {message}")
        self.line = line
        self.path = path


class DatasetSchemaError(DatasetParseError):
    """A dataset row does not match the header layout."""


class ArtifactError(RegAttackError):
    """Error reading/writing a model, result or report file."""

    def __init__(self, message: str, path: Path | None = None) -> None:
        """Initialize ArtifactError.

        Args:
            message: Error message
            path: Path to the artifact
        """
        super().__init__(message)
        self.path = path


class UnitError(RegAttackError):
    """A campaign unit (one subject or held-out subject) failed."""

    def __init__(self, unit_id: str, stage: str, cause: str) -> None:
        """Initialize UnitError.

        Args:
            unit_id: Subject id of the unit
            stage: Pipeline stage that failed (train, cw_r, ...)
            cause: Message of the underlying error
        """
        super().__init__(f"Unit {unit_id}: {stage} failed: {cause}")
        self.unit_id = unit_id
        self.stage = stage
        self.cause = cause
