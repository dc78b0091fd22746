"""Exception types raised by the simulator and its diagnostics."""


class ScalarChargeError(Exception):
    """Base class for all errors raised by this package."""


class NonpositiveMass(ScalarChargeError):
    """The dynamical mass reached a value <= 0."""


class StepUnderflow(ScalarChargeError):
    """The adaptive integrator step fell below its floor."""


class SmallnessViolation(ScalarChargeError):
    """The radiation data is too large for the mass lower bound to stay positive."""


class GridMismatch(ScalarChargeError):
    pass


class MaxIterExceeded(ScalarChargeError):
    """Picard iteration did not reach the requested tolerance.

    The partial :class:`~scalar_charge.picard.ContractionReport` is attached
    as ``report`` and the last iterate as ``curve``.
    """

    def __init__(self, message, report=None, curve=None):
        super().__init__(message)
        self.report = report
        self.curve = curve


class OutOfRange(ScalarChargeError):
    """A time outside the trajectory's span was requested."""


class EpsilonTooSmall(ScalarChargeError):
    pass


class NotYetExited(ScalarChargeError):
    """The radiation has not left the worldline by the end of the trajectory."""

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class InsufficientHorizon(ScalarChargeError):
    pass


class ConfigError(ScalarChargeError):
    pass
