"""Exception hierarchy shared by every actionlift module.

Validation failures subclass ValueError so callers that only know the standard
library still catch them. The CLI maps every LiftError to a nonzero exit status.
"""

from __future__ import annotations

from typing import Any


class LiftError(Exception):
    """Base class for all actionlift errors."""


class ConfigError(LiftError, ValueError):
    """A configuration value violates its physical bound."""

    def __init__(self, field: str, reason: str) -> None:
        self.field = field
        self.reason = reason
        super().__init__(f"{reason} (field '{field}')")


class ActivationError(LiftError, ValueError):
    """Raw actions could not be mapped to physical controls."""


class InitialStateError(LiftError, ValueError):
    """The initial state is outside the admissible set for the model."""


class RolloutError(LiftError, ValueError):
    """A rollout produced an invalid state at a specific interval."""

    def __init__(self, message: str, step: int, substep: int | None = None) -> None:
        self.step = step
        self.substep = substep
        where = f"step {step}" if substep is None else f"step {step}, substep {substep}"
        super().__init__(f"{message} at {where}")


class LossError(LiftError, ValueError):
    """Loss inputs are inconsistent (length mismatch or degenerate weights)."""


class UndefinedCorrelationError(LiftError, ValueError):
    """Pearson correlation is undefined for the given series."""


class TrainingDivergedError(LiftError, RuntimeError):
    """Training produced a non-finite or steadily increasing loss."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None) -> None:
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class FormatError(LiftError, ValueError):
    """An input file does not follow its CSV or JSON contract."""
