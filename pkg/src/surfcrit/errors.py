"""Exception hierarchy shared by all modules.

Each class carries the CLI exit status it maps to, so the command layer can
translate failures without inspecting messages.
"""


class SurfcritError(Exception):
    exit_status = 3


class InputError(SurfcritError, ValueError):
    """Malformed input: bad parameters, bad files, points off the chart."""

    exit_status = 2


class ChartDomainError(InputError):
    """A point lies outside the chart domain of the surface model."""


class ParameterError(InputError):
    """A family or solver parameter is outside its documented range."""


class DegenerateCurveError(InputError):
    """The curve parametrization is singular or the curve is not simple."""


class PreconditionError(InputError):
    """An operation was called on input violating its precondition."""


class AdmissibilityError(InputError):
    """Root set fails the admissibility inequality for the perturbation."""


class NumericalError(SurfcritError):
    """A numerical procedure failed to produce a trustworthy result."""

    exit_status = 3


class ResolutionError(NumericalError):
    """A grid or mesh is too coarse for the requested geometry."""


class ConvergenceError(NumericalError):
    """An iteration hit its cap; ``history`` holds the residual trace."""

    def __init__(self, message, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = list(history or [])


class BoundaryProximityError(NumericalError):
    """Derivative recovery requested too close to the boundary."""
