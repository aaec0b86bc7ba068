"""
Exception hierarchy for the qcurv library
Each class carries the process exit code the CLI maps it to
"""


class QCurvError(Exception):
    """Base class for all library errors"""

    exit_code = 2


class ConfigError(QCurvError):
    """Malformed configuration or unsupported option"""

    exit_code = 1

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


class DomainError(QCurvError, ValueError):
    """An argument lies outside the domain of an operation"""

    exit_code = 2


class PreconditionError(QCurvError):
    """A mathematical precondition of an operation is violated"""

    exit_code = 2


class GridRangeError(QCurvError):
    """The radial grid is too short to capture the decay of a field"""

    exit_code = 2


class ConstructionError(QCurvError):
    """An auxiliary object failed its defining identity"""

    exit_code = 3


class NumericalQualityError(QCurvError):
    """A computed quantity missed its accuracy target"""

    exit_code = 3
