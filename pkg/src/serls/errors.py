"""Exception taxonomy shared across the library and the CLI.

Two failure families matter operationally: bad inputs (data, config,
dimensions) and numerical failures (infeasible constraints, solver
breakdown).  The CLI maps them to exit codes 2 and 1 respectively.
"""


class SerlsError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SerlsError, ValueError):
    """Malformed data, configuration, or dimension mismatch."""


class InvalidWeightsError(InvalidInputError):
    """Sample weights that are negative, non-finite, or sum to zero."""


class UnknownCharacteristicError(InvalidInputError):
    """A characteristic name that is not present in the layout."""


class SolveError(SerlsError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class InfeasibleError(SolveError):
    """The constraint system admits no solution.

    ``row`` indexes the most violated constraint row (equalities first).
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DegenerateVarianceError(SolveError):
    """Winsorized outcome variance is zero; objective ratios are undefined."""
