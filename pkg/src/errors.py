"""Exception hierarchy.

Each error also derives from the builtin a caller would naturally catch, so
``except ValueError`` keeps working around geometry and parsing code.
"""


class SpnKitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidQuaternionError(SpnKitError, ValueError):
    pass


class PointBehindCameraError(SpnKitError, ValueError):
    """A body point projects with depth at or below the near limit."""


class DegenerateBoxError(SpnKitError, ValueError):
    """Bounding box with zero width, height or diagonal."""


class ModelFormatError(SpnKitError, ValueError):
    pass


class LabelMismatchError(SpnKitError, ValueError):
    """Label, codebook and config dimensions disagree."""


class DataError(SpnKitError, ValueError):
    """Input files are inconsistent or malformed."""


class UsageError(SpnKitError, ValueError):
    pass


class SamplingError(SpnKitError, RuntimeError):
    """A rejection sampler exhausted its draw budget."""


class NonConvergenceError(SpnKitError, RuntimeError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SingularNormalMatrixError(SpnKitError, RuntimeError):
    pass


class GradientCheckError(SpnKitError, RuntimeError):
    pass
