"""Exception hierarchy shared by every egret module."""

from __future__ import annotations


class EgretError(Exception):
    """Base class for all runtime errors."""


class SchemaError(EgretError):
    """A state document failed schema validation.

    Carries the full list of violations so callers can report every
    problem in one pass instead of stopping at the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"schema validation failed: {lines}")


class IntegrityError(EgretError):
    """Cross-file references are dangling or mutually inconsistent."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("integrity check failed: " + "; ".join(self.problems))


class DirectionIntegrityError(EgretError):
    """The research-direction document does not match its recorded digest."""


class LifecycleError(EgretError):
    """An operation was attempted in a version status that forbids it."""


class TransitionError(EgretError):
    """A claim-status transition is not allowed by the lattice."""


class AdmissionError(EgretError):
    """A claim was pushed toward admitted status without a complete chain."""

    def __init__(self, claim_id, violations):
        self.claim_id = claim_id
        self.violations = list(violations)
        super().__init__(
            f"admission refused for {claim_id}: " + "; ".join(self.violations)
        )


class CloseoutError(EgretError):
    """Closeout refused: uncovered items or unfinished insights."""

    def __init__(self, message, items=()):
        self.items = list(items)
        if self.items:
            message = f"{message}: " + ", ".join(self.items)
        super().__init__(message)


class LockError(EgretError):
    """The repository write lock could not be acquired."""


class UsageError(EgretError):
    """The caller violated an operation precondition."""
