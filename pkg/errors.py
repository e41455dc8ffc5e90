"""
Exception hierarchy for truetrees
"""


class TrueTreeError(Exception):
    """Base class; exit_code is what the command line returns for it"""

    exit_code = 1


class InputError(TrueTreeError):
    """Malformed input files, invalid trees or bad options"""

    exit_code = 1


class GridError(InputError):
    """The dyadic cover of K is not connected"""


class NumericalError(TrueTreeError):
    """Base class for numerical failures"""

    exit_code = 2


class ConvergenceError(NumericalError):
    """Newton iteration stopped without reaching tolerance"""

    def __init__(self, reason, residual=float("inf"), iterations=0):
        super().__init__(f"{reason} (residual {residual:.3e} after {iterations} iterations)")
        self.reason = reason
        self.residual = residual
        self.iterations = iterations


class SolveError(NumericalError):
    """Every retry and the continuation fallback failed"""

    def __init__(self, message, best_residual=float("inf"), diagnosis=""):
        super().__init__(f"{message}; best residual {best_residual:.3e}; {diagnosis}".rstrip("; "))
        self.best_residual = best_residual
        self.diagnosis = diagnosis


class TraceError(NumericalError):
    """Level-curve tracing failed"""


class RootFindingError(NumericalError):
    """Simultaneous iteration did not converge"""


class StatisticsError(NumericalError):
    """Too few Monte Carlo hits for the requested estimate"""


class SubdivisionError(NumericalError):
    """Circle subdivision could not be certified"""


class HeightError(NumericalError):
    """Height facts could not be repaired"""

    def __init__(self, message, edge=None):
        super().__init__(message if edge is None else f"{message} (edge {edge})")
        self.edge = edge


class ResourceGuardError(TrueTreeError):
    """Request exceeds a desk-scale guard"""

    exit_code = 3


class StageError(TrueTreeError):
    """A pipeline stage failed; keeps the exit code of the cause"""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
