"""Exception hierarchy shared by all modules.

NumericError and its subclasses signal a violated numerical precondition or a
computation that left the valid domain; IO-level problems get their own branch
so the CLI can map them to distinct exit codes.
"""


class BwdamError(Exception):
    """Base class for all package errors."""


class NumericError(BwdamError):
    """Non-finite values or a numerical result outside its valid domain."""


class DimensionError(NumericError):
    """Operands have incompatible dimensions."""


class SymmetryViolation(NumericError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class NotPositiveDefinite(NumericError):
    """SPD matrix expected; carries the offending eigenvalue."""

    def __init__(self, message: str, eigenvalue: float | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateResult(NumericError):
    """An operation produced a covariance that is no longer positive definite."""


class DomainError(NumericError):
    """Scalar argument outside its documented domain (e.g. t outside [0,1])."""


class RejectionBudgetExceeded(NumericError):
    """Rejection sampler failed to accept within its iteration budget."""


class BinarySearchFailed(NumericError):
    """Bisection could not reach the requested tolerance."""


class SinglePattern(BwdamError):
    """Quantity undefined for a single-pattern bank (needs N >= 2)."""


class MissingCommutingFamily(BwdamError):
    """Operation presupposes a bank with a shared eigenbasis."""


class GammaTooLarge(BwdamError):
    """Capacity bound requested with gamma >= sqrt(e), where it is void."""


class KappaNotContractive(BwdamError):
    """Contraction coefficient >= 1; iteration count is undefined."""


class EpsilonTooLarge(BwdamError):
    """Requested accuracy eps must be below the basin radius r."""


class InsufficientQueries(BwdamError):
    """Experiment config selects fewer than one query."""


class ParseError(BwdamError):
    """File failed to parse; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DuplicateWord(ParseError):
    """Vocabulary file contains a repeated word."""


class VarianceNonPositive(ParseError):
    """Vocabulary entry with sigma <= 0."""
