"""Exception classes raised by the solver.

Each class carries the CLI exit code it maps to, so the front-end can
translate failures without a lookup table of its own.
"""


class NehariLinkingError(Exception):
    exit_code = 3


class ConfigError(NehariLinkingError):
    exit_code = 2


class NoCrossing(NehariLinkingError):
    """No positive b with f(b) = lambda * b (s * lambda >= 1)."""


class ShootingBracketFailure(NehariLinkingError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class IntegrationFailure(NehariLinkingError):
    pass


class FitWindowError(NehariLinkingError):
    pass


class GridMismatch(NehariLinkingError):
    pass


class SolverStall(NehariLinkingError):
    pass


class NotProjectable(NehariLinkingError):
    exit_code = 5


class UndefinedBarycenter(NehariLinkingError):
    pass


class BumpTruncated(NehariLinkingError):
    pass


class ConstraintLost(NehariLinkingError):
    exit_code = 5

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class GeometryBreach(NehariLinkingError):
    exit_code = 4

    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run
