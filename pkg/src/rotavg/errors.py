"""Exception and warning types shared across the package."""


class RotavgError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(RotavgError, ValueError):
    """An input failed a structural or numerical validity check."""


class GraphConnectivityError(RotavgError, ValueError):
    """The pose graph is not connected."""


class GraphAcyclicityError(RotavgError, ValueError):
    """The pose graph has no cycle."""


class GenerationError(RotavgError, RuntimeError):
    """A synthetic problem could not be generated under the given constraints."""


class EigenConvergenceError(RotavgError, RuntimeError):
    """The eigensolver did not reach the requested residual tolerance.

    ``result`` carries the best eigenpairs computed so far, or ``None`` when
    the failure happened before any Ritz pair was formed.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class G2oParseError(RotavgError, ValueError):
    """A g2o input could not be parsed; ``line_number`` is 1-based."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SolutionFormatError(RotavgError, ValueError):
    """A solution file could not be parsed; ``line_number`` is 1-based."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DegenerateProjectionWarning(UserWarning):
    """The nearest-rotation projection had a near-ambiguous minimizer."""


class OptimalityTieWarning(UserWarning):
    """Two stationary points tie in residual-angle magnitude (cycle error of pi)."""


class PhaseProjectionWarning(UserWarning):
    """An eigenvector entry was perturbed before projection onto the unit circle."""
