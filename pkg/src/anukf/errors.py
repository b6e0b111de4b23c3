"""Exception types raised by the filtering and simulation pipeline."""


class AnukfError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefiniteError(AnukfError):
    """A covariance matrix failed its Cholesky factorization.

    Carries the index of the first failing pivot (leading minor).
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix not positive definite (pivot {pivot})")


class PropagationDivergenceError(AnukfError):
    """A propagated sigma point contains non-finite values."""

    def __init__(self, point_index: int):
        self.point_index = point_index
        super().__init__(f"non-finite values in propagated sigma point {point_index}")


class SingularInnovationError(AnukfError):
    """The innovation covariance is not invertible."""


class FilterConditioningError(AnukfError):
    """A filter covariance lost positive definiteness.

    Carries an estimate of the smallest eigenvalue for diagnostics.
    """

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"covariance lost positive definiteness (min eigenvalue {min_eigenvalue:.3e})"
        )


class ImplausibleCorrectionError(AnukfError):
    """An error-state correction is too large to be a valid small-angle fix."""


class NumericFaultError(AnukfError):
    """A network layer produced non-finite activations."""

    def __init__(self, layer: str):
        self.layer = layer
        super().__init__(f"non-finite activation in layer {layer}")


class TrainingFaultError(AnukfError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")


class WeightFormatError(AnukfError):
    """A serialized weight document failed validation."""


class IngestError(AnukfError):
    """A CSV data file failed schema or sanity validation.

    ``row`` is the 1-based data row number when applicable.
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"{message} (row {row})")


class ConfigError(AnukfError):
    """An experiment configuration file is invalid."""
