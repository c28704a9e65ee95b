"""Error types with explicit exit codes and reasons.

Exit code families:
    1 -> validation failures (bad input, bad configuration, malformed files)
    2 -> runtime failures (divergence, oracle failures, unwritable outputs)
"""

from __future__ import annotations

from dataclasses import dataclass

VALIDATION_EXIT_CODE = 1
RUNTIME_EXIT_CODE = 2


@dataclass(eq=False)
class GtpError(Exception):
    """Base error with explicit process exit details."""

    message: str
    exit_code: int
    reason: str

    def __str__(self) -> str:
        return self.message


class ValidationFailure(GtpError):
    """Input, configuration or file-format problem (exit code 1)."""

    def __init__(self, message: str, reason: str = "validation_failed") -> None:
        super().__init__(message=message, exit_code=VALIDATION_EXIT_CODE, reason=reason)


class RuntimeFailure(GtpError):
    """Failure while executing a valid request (exit code 2)."""

    def __init__(self, message: str, reason: str = "runtime_failed") -> None:
        super().__init__(message=message, exit_code=RUNTIME_EXIT_CODE, reason=reason)


class ShapeError(ValidationFailure):
    """Raised when tensor shapes are incompatible for an operation."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="shape_mismatch")


class ConfigurationError(ValidationFailure):
    """Raised when a configuration value is outside its valid domain."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="configuration_invalid")


class ConfigFileLoadError(ValidationFailure):
    """Raised when configuration or environment files cannot be loaded."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="config_load_failed")


class SettingsValidationError(ValidationFailure):
    """Raised when a configuration document fails strict schema validation."""

    def __init__(self, errors: list[str]) -> None:
        rendered = "\n".join(f"- {item}" for item in errors)
        super().__init__(
            f"Settings validation failed:\n{rendered}",
            reason="settings_validation_failed",
        )
        self.errors = errors


class InvalidModeError(ValidationFailure):
    """Raised when an operation is requested in a mode it cannot support."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="invalid_mode")


class LabelIndexError(ValidationFailure, IndexError):
    """Raised when a class index lies outside the label space."""

    def __init__(self, index: int, num_classes: int) -> None:
        super().__init__(
            f"Class index {index} out of range [0, {num_classes - 1}].",
            reason="label_out_of_range",
        )
        self.index = index


class DatasetError(ValidationFailure):
    """Raised for unreadable images, unknown classes or malformed label files."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="dataset_invalid")


class PredictionParseError(ValidationFailure):
    """Raised when a prediction CSV row cannot be parsed."""

    def __init__(self, path: str, line: int, detail: str) -> None:
        super().__init__(
            f"Malformed prediction file '{path}' at line {line}: {detail}",
            reason="prediction_parse_failed",
        )
        self.line = line


class PredictionValidationError(ValidationFailure):
    """Raised when probabilities leave the simplex or ids repeat."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="prediction_invalid")


class AlignmentError(ValidationFailure):
    """Raised when prediction sets do not share one sample id sequence."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="predictions_misaligned")


class CheckpointFormatError(ValidationFailure):
    """Raised when a checkpoint is malformed or inconsistent with its hyperparameters."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="checkpoint_invalid")


class ReportFormatError(ValidationFailure):
    """Raised when a metrics report document cannot be parsed."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="report_invalid")


class UndefinedMetricError(ValidationFailure):
    """Raised when a metric has no defined value for the given data."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="metric_undefined")


class TrainingDivergedError(RuntimeFailure):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch: int, batch: int, loss: float) -> None:
        super().__init__(
            f"Non-finite training loss {loss} at epoch {epoch}, batch {batch}.",
            reason="training_diverged",
        )
        self.epoch = epoch
        self.batch = batch


class OptimizerUsageError(RuntimeFailure):
    """Raised when the optimizer steps without populated gradients."""

    def __init__(self, message: str) -> None:
        super().__init__(message, reason="optimizer_misuse")


class GradientOracleError(RuntimeFailure):
    """Raised when the finite-difference oracle meets a non-finite loss."""

    def __init__(self, parameter: str, index: tuple[int, ...]) -> None:
        super().__init__(
            f"Finite-difference oracle produced a non-finite loss for '{parameter}' at {index}.",
            reason="gradient_oracle_failed",
        )
        self.parameter = parameter


class OutputWriteError(RuntimeFailure):
    """Raised when an output path cannot be written."""

    def __init__(self, path: str, detail: str) -> None:
        super().__init__(f"Unable to write '{path}': {detail}", reason="output_write_failed")
