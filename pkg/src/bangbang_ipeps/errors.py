from typing import Optional, Sequence


__all__ = [
    "BangBangError",
    "ConfigError",
    "ShapeError",
    "NotUnitaryError",
    "NumericalError",
    "ConvergenceError",
    "DegenerateNormError",
    "MemoryBudgetError",
    "ConeTooLargeError",
    "ConvergenceWarning",
]


class BangBangError(Exception):
    """Root of every error raised by the package."""

class ConfigError(BangBangError, ValueError):
    """Invalid configuration, schema violation or unsupported file format."""

class ShapeError(BangBangError, ValueError):
    """Tensor extents that cannot be contracted or combined."""

class NotUnitaryError(BangBangError, ValueError):
    """A gate that was required to be unitary is not."""

class NumericalError(BangBangError, RuntimeError):
    """A numerical routine failed."""

class ConvergenceError(NumericalError):
    """An iterative routine did not reach its tolerance.

    Attributes:
        residual: last residual (or drift) measured
        history: per-iteration residuals, oldest first
    """

    def __init__(self, message: str, residual: Optional[float] = None,
                 history: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []

class DegenerateNormError(NumericalError):
    """The norm network of an expectation value vanished."""

class MemoryBudgetError(NumericalError):
    """A contraction would exceed the configured memory budget."""

    def __init__(self, message: str, estimate_bytes: int):
        super().__init__(message)
        self.estimate_bytes = estimate_bytes

class ConeTooLargeError(NumericalError):
    """A causal cone does not fit under the qubit cap."""

    def __init__(self, message: str, depth: int, support_size: int):
        super().__init__(message)
        self.depth = depth
        self.support_size = support_size

class ConvergenceWarning(RuntimeWarning):
    """Soft convergence failure; a best-so-far result was returned."""
