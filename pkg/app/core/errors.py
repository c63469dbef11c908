"""Exception types raised across the package."""
from typing import Optional


class PulseDesignError(Exception):
    """Base class for all package errors."""


class ContractViolation(PulseDesignError, ValueError):
    """An input broke a documented precondition (arity, unit norm, dt > 0, ...)."""


class InfeasibleConstraintError(ContractViolation):
    """Constraint limits are non-positive or incompatible with the basis."""


class ShapeParseError(PulseDesignError, ValueError):
    """Malformed shape file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigValidationError(PulseDesignError, ValueError):
    """Run configuration failed schema validation."""

    def __init__(self, message: str, line: Optional[int] = None, path: str = ""):
        self.line = line
        self.path = path
        prefix = f"line {line}" if line is not None else "config"
        if path:
            prefix = f"{prefix} ({path})"
        super().__init__(f"{prefix}: {message}")
