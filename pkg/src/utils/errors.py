"""
Typed errors raised by the mtlab library and the command line front end.

Validation errors map to exit code 2, numerical failures to exit code 3.
"""

# pylint: disable=too-few-public-methods


class MtlabError(Exception):
    """Base class for every error raised by mtlab."""

    exit_code = 1

    def to_entry(self):
        """
        Build the structured error entry written into report sidecars.
        Returns:
            dict: Error type name and message.
        """
        return {"type": type(self).__name__, "message": str(self)}


class ValidationError(MtlabError):
    """Bad input: configuration, parameters, or grid set-up."""

    exit_code = 2


class NumericalFailure(MtlabError):
    """A numerical method did not deliver a trustworthy result."""

    exit_code = 3


class UnknownCommandError(ValidationError):
    """Subcommand not recognised."""


class ConfigParseError(ValidationError):
    """
    Malformed configuration document or invalid field.
    Args:
        message (str): Human readable reason.
        line (int): Line of the JSON syntax error, if any.
        column (int): Column of the JSON syntax error, if any.
        field (str): Dotted name of the offending field, if any.
    """

    def __init__(self, message, line=None, column=None, field=None):
        self.line = line
        self.column = column
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if field is not None:
            where.append(f"field '{field}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class InvalidParameterError(ValidationError):
    """A precondition on numerical parameters is violated."""


class SupportOverlapError(ValidationError):
    """Bubble supports intersect or exceed a quarter of the box."""


class UnderResolvedError(ValidationError):
    """Support radius is smaller than four grid cells."""


class IoFailureError(ValidationError):
    """Report files could not be written."""


class NonPositiveBubbleError(NumericalFailure):
    """
    Bubble profile crossed zero before the requested radius.
    Args:
        radius (float): Radius (length units) of the crossing.
    """

    def __init__(self, radius):
        self.radius = radius
        super().__init__(f"bubble profile reaches zero at r = {radius:.6e}")


class StepFailureError(NumericalFailure):
    """Adaptive ODE controller broke down."""


class QuadratureToleranceError(NumericalFailure):
    """Adaptive quadrature did not reach the requested tolerance."""


class SingularFitError(NumericalFailure):
    """Least-squares design matrix is too ill-conditioned."""


class BracketFailureError(NumericalFailure):
    """Bisection bracket lost its sign change."""


class EmptyPositivePartError(NumericalFailure):
    """The positive part of the field vanishes identically."""


class NonConvergenceError(NumericalFailure):
    """Iterative transport solver hit its iteration cap."""


class LineSearchStallError(NumericalFailure):
    """Armijo backtracking could not find a decrease."""


class NonPositiveSolutionError(NumericalFailure):
    """A converged solution is not strictly positive."""


class KrylovBreakdownError(NumericalFailure):
    """Inner Krylov solve failed."""


class MaxIterationsError(NumericalFailure):
    """Outer iteration budget exhausted."""


class StepCollapseError(NumericalFailure):
    """
    Continuation step underflowed its minimum.
    Args:
        message (str): Reason.
        record: Partial branch record accumulated before the collapse.
    """

    def __init__(self, message, record=None):
        self.record = record
        super().__init__(message)


class NaNInReportError(NumericalFailure):
    """A report table contains NaN values."""


def exit_code_for(error):
    """
    Map an exception to the process exit code.
    Args:
        error (BaseException): The raised error.
    Returns:
        int: 2 for validation errors, 3 for numerical failures, 1 otherwise.
    """
    if isinstance(error, MtlabError):
        return error.exit_code
    return 1
