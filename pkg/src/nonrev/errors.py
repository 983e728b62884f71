"""Exception hierarchy.

Validation errors map to CLI exit code 1, numerical failures to exit code 2.
"""


class NonrevError(Exception):
    """Base class for all library errors."""


class ValidationError(NonrevError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(NonrevError, ArithmeticError):
    """A computation failed or produced unusable values."""


class NotSymmetric(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class NotAntisymmetric(ValidationError):
    pass


class TargetNotBracketed(ValidationError):
    pass


class DegenerateLadder(ValidationError):
    pass


class TimeBelowThreshold(ValidationError):
    pass


class BoxTooSmall(ValidationError):
    pass


class GradientMismatch(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


class Overflow(NumericalError):
    pass


class Underflow(NumericalError):
    pass


class NegativeDiscriminant(NumericalError):
    pass


class NonSpd(NumericalError):
    pass


class NonFinite(NumericalError):
    """Trajectory blow-up during simulation."""

    def __init__(self, path: int, step: int):
        super().__init__(f"non-finite state in path {path} at step {step}")
        self.path = path
        self.step = step
