"""Exception types shared across the package."""


class GpmError(Exception):
    """Base class for all package errors."""


class ParseError(GpmError):
    """Raised on malformed polynomial or measure expressions.

    Carries the offending position so CLI callers can point at it.
    """

    def __init__(self, message: str, text: str = "", pos: int = -1):
        self.text = text
        self.pos = pos
        if pos >= 0:
            message = f"{message} (at position {pos}: {text[:pos]!r} >>> {text[pos:pos + 12]!r})"
        super().__init__(message)


class DimensionMismatch(GpmError):
    """Operands live on spaces of different dimension."""


class DegenerateSampleError(GpmError):
    """Sample has zero variance along some coordinate; KDE bandwidth undefined."""


class TruncationError(GpmError):
    """Grid window truncates non-negligible mass; the requested quantity is unreliable."""


class SolverFailure(GpmError):
    """The LP / OT backend did not reach the required optimality tolerance."""
