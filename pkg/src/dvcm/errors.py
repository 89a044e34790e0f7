"""Exception hierarchy shared across the package."""


class DvcmError(Exception):
    """Base class for all package errors."""


class FactorizationError(DvcmError, ValueError):
    """A symmetric factorization failed even at the largest allowed jitter."""


class ConvergenceError(DvcmError, RuntimeError):
    """An iterative routine hit its iteration cap."""


class DatasetFormatError(DvcmError, ValueError):
    """A dataset file violates the documented text format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DvcmError, ValueError):
    """Invalid run configuration."""


class ChainError(DvcmError, RuntimeError):
    """A numerical failure inside an MCMC chain."""

    def __init__(self, message, iteration=None, subset_id=None):
        self.iteration = iteration
        self.subset_id = subset_id
        parts = []
        if subset_id is not None:
            parts.append(f"subset {subset_id}")
        if iteration is not None:
            parts.append(f"iteration {iteration}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
