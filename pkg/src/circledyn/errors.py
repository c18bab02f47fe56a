"""Exception hierarchy shared across the toolkit.

``ConfigError`` maps to CLI exit code 2 (usage/parse problems);
``MathFailure`` and subclasses map to exit code 1 and always carry a
witness describing what failed.
"""


class CircleDynError(Exception):
    pass


class ConfigError(CircleDynError):
    pass


class InvalidWordError(CircleDynError):
    pass


class MathFailure(CircleDynError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotLocallyExpandingError(MathFailure):
    pass


class CoverGapError(MathFailure):
    pass


class ConstructionFailure(MathFailure):
    pass


class BoundaryOrbitError(MathFailure):
    pass


class NonInvariantMeasureError(MathFailure):
    pass


class ConvergenceFailure(MathFailure):
    pass
