"""Exception hierarchy.  The CLI maps these onto exit codes."""


class RandNLSError(Exception):
    pass


class StructuralError(RandNLSError, ValueError):
    """Mismatched grids, wrong representation, wrong dimension."""


class ConfigurationError(RandNLSError, ValueError):
    """A request that is well-formed but cannot be honoured with these parameters."""


class EstimationError(RandNLSError, ValueError):
    """Not enough data for a statistic or quadrature to be meaningful."""


class BlowUpError(RandNLSError, RuntimeError):
    """Non-finite values appeared during time stepping.

    ``trajectory`` holds every checkpoint emitted before the failure, so the
    last healthy state is ``trajectory.checkpoints[-1]``.
    """

    def __init__(self, message, trajectory=None, time=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time

    @property
    def last_checkpoint(self):
        if self.trajectory is None or not self.trajectory.checkpoints:
            return None
        return self.trajectory.checkpoints[-1]
