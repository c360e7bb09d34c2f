"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands built over different variable counts."""


class DegenerateBox(ValueError):
    """Box with a lower bound not strictly below its upper bound."""


class DegreeTooLow(ValueError):
    """Requested expansion degree is below the polynomial degree.

    Callers should elevate the degree vector and retry.
    """


class BasisNotDownwardClosed(ValueError):
    """Monomial list misses an index dominated by a listed one."""


class ExpansionLimitExceeded(RuntimeError):
    """Power-product expansion grew past the configured term cap."""


class LpFailure(RuntimeError):
    """LP solve ended in a state that cannot be interpreted (numeric breakdown)."""


class GenerationFailure(RuntimeError):
    """Benchmark generator exhausted its retry budget."""


class ParseError(ValueError):
    """Text input rejected; carries a position when available."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
