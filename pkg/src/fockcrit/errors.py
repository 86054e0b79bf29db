"""Exception types shared across the package."""


class FockcritError(Exception):
    """Base class for all package errors."""


class ValidationError(FockcritError, ValueError):
    """An input state or ensemble violates its invariants (e.g. normalization)."""


class DomainError(FockcritError, ValueError):
    """A bound or criterion was evaluated outside its domain."""


class CapacityError(FockcritError, ValueError):
    """A requested Fock-space cutoff exceeds the supported capacity."""


class SchemaError(FockcritError, ValueError):
    """A state file does not follow the documented schema."""


class NonNormalizableError(FockcritError, ArithmeticError):
    """The three-term recurrence produced a divergent (non-normalizable) sequence."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(FockcritError, RuntimeError):
    """An iterative solver failed to meet its tolerances."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
