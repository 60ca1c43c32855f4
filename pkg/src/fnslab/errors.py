"""Exception taxonomy shared across the package.

The CLI maps these onto its exit-code contract: verification failures exit
with 1, input and parse problems with 2, budget and resource limits with 3.
"""

from __future__ import annotations


class FnslabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FnslabError, ValueError):
    """An argument lies outside an operation's documented domain."""


class AdditionOverflowError(FnslabError, ArithmeticError):
    """A digit-sequence sum reached 1, so a carry left position 2."""


class ParseError(FnslabError, ValueError):
    """A certificate, report, slalom, or oracle file is malformed."""


class OracleError(FnslabError):
    """A perfect-set oracle could not serve a query."""


class OracleContractError(OracleError):
    """An oracle kept returning points that violate its contract."""


class SeparationLimitError(FnslabError):
    """Point separation did not happen below the configured maximum level."""


class InfeasiblePositionError(FnslabError):
    """No safe translation digit exists at a position.

    This can only happen when an upstream invariant (tree level growth or
    slalom width policy) was violated, so it signals a caller bug.
    """

    def __init__(self, position: int, message: str | None = None):
        self.position = position
        super().__init__(message or f"no safe digit at position {position}")


class VerificationError(FnslabError):
    """A certificate or report was rejected.

    ``stage`` is ``"structure"``, ``"symbolic"`` or ``"numeric"``;
    ``position`` names the offending digit position or sample when known.
    """

    def __init__(self, message: str, *, stage: str, position: int | None = None):
        self.stage = stage
        self.position = position
        super().__init__(message)


class BudgetError(FnslabError):
    """An exhaustive enumeration would exceed the configured budget."""
