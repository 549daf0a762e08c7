"""Exception types shared across the package."""


class CondopError(Exception):
    """Base class for all condop errors."""


class DomainError(CondopError, ValueError):
    """Invalid value or mismatched objects (wrong space, bad weight, ...)."""


class CaseError(DomainError):
    """Classifier invoked for the wrong exponent case (p=q vs q<p vs p<q)."""


class PreconditionError(CondopError, ValueError):
    """A stated precondition of an operation does not hold for the input."""


class ResourceError(CondopError, RuntimeError):
    """Request exceeds the desk-scale resource caps (e.g. refinement depth)."""


class NotConditionalType(CondopError, ValueError):
    """Recognition failed: the matrix does not factor as k*E(w.) over any partition."""


class ValidationError(CondopError, ValueError):
    """Scenario file failed validation.

    ``field_path`` names the offending entry (e.g. ``space.weights[1]``).
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")
