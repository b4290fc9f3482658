"""Exception hierarchy shared by every layer of the auditor."""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all errors raised by rsaudit."""


class SpecError(AuditError):
    """A task specification is invalid. Maps to CLI exit code 2."""


class MalformedFormula(SpecError):
    """Parse error or reference to an undeclared atom.

    ``line`` and ``column`` are 1-based and only set when the error comes
    from the text DSL.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        self.path: str | None = None
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class UnsatisfiableKnowledge(SpecError):
    """Some supported concept vector admits no label."""


class NonDeterministicKnowledge(SpecError):
    """The task declares a deterministic label map but some supported vector admits several labels."""


class DimensionMismatch(SpecError):
    """Objects defined over different concept spaces were combined."""


class SearchSpaceTooLarge(AuditError):
    def __init__(self, size: int, ceiling: int, what: str = "search space"):
        self.size = size
        self.ceiling = ceiling
        super().__init__(f"{what} has {size} candidates, above the ceiling of {ceiling}")


class CensusNotListed(AuditError):
    """The census did not keep an explicit optimum list."""


class InvalidConceptMass(AuditError):
    """Probability mass was placed on a concept vector that admits no label."""


class InfiniteLoss(AuditError):
    """A log-loss was evaluated where the relevant probability is zero."""


class UnsupportedConnective(AuditError):
    pass


class NonFiniteLoss(AuditError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class SeedBudgetExhausted(AuditError):
    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)
