"""Shared exception types."""


class CapabilityError(ValueError):
    """An evaluator cannot deliver what was asked (e.g. derivative order)."""


class SchemeOverflowError(RuntimeError):
    """The scheme state became non-finite; carries the offending step index."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite scheme state at step {step}")
