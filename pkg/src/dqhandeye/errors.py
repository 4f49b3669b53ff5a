class CalibrationError(Exception):
    """Base class for failures of the calibration pipeline."""


class UnderConstrainedError(CalibrationError):
    """The motion data cannot determine a unique calibration."""

    def __init__(self, message=None, null_dim=None):
        if message is None:
            message = (
                "calibration is under-constrained: at least two motions with "
                "non-parallel rotation axes are required"
            )
            if null_dim is not None:
                message += f" (solution space has dimension {null_dim})"
        super().__init__(message)
        self.null_dim = null_dim


class ConvergenceError(CalibrationError):
    """The dual ascent did not reach the requested duality gap."""


class NotPSDError(CalibrationError, ValueError):
    """A cost matrix is not symmetric positive semidefinite."""
