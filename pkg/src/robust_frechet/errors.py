"""Exception hierarchy with stable machine-readable codes.

Every error raised by the library derives from :class:`RobustFrechetError`
and carries a ``code`` string plus an ``exit_status`` used by the CLI when
emitting its error record.
"""


class RobustFrechetError(Exception):
    code = "error"
    exit_status = 1


class DimensionMismatch(RobustFrechetError):
    """Operands live in incompatible spaces (matrix dims, vector lengths)."""

    code = "dimension_mismatch"
    exit_status = 2


class GridMismatch(RobustFrechetError):
    """Quantile functions defined on different level grids."""

    code = "grid_mismatch"
    exit_status = 3


class NearSingularDenominator(RobustFrechetError):
    """The coefficient sum of a weighted mean is too close to zero.

    During robust fitting this signals a tuning pair so small that nearly
    all observations were zeroed out.
    """

    code = "near_singular_denominator"
    exit_status = 4


class DegenerateBIC(RobustFrechetError):
    """A tuning pair produced a degenerate goodness-of-fit term.

    ``bic_score`` reports this condition through an infeasible record with
    an infinite BIC sentinel instead of raising, so grid traces stay
    complete; the class exists for the stable error-code table and for
    callers that want to raise it themselves.
    """

    code = "degenerate_bic"
    exit_status = 5


class NoFeasiblePair(RobustFrechetError):
    """Every candidate tuning pair was infeasible (degenerate or too many
    flagged outliers)."""

    code = "no_feasible_pair"
    exit_status = 6


class InsufficientIterations(RobustFrechetError):
    """A fit trace is too short for the requested diagnostic."""

    code = "insufficient_iterations"
    exit_status = 7


class ParseError(RobustFrechetError):
    """A file could not be parsed; the message names the location."""

    code = "parse_error"
    exit_status = 8


class ShapeError(RobustFrechetError):
    """Parsed data has an impossible shape (row lengths, counts)."""

    code = "shape_error"
    exit_status = 9


class InvariantError(RobustFrechetError):
    """Data violates a domain invariant (asymmetry, non-monotone quantiles)."""

    code = "invariant_error"
    exit_status = 10
