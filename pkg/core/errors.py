class BiotError(Exception):
    """Base class for every failure raised by the solver library."""


class MeshError(BiotError, ValueError):
    pass


class ConfigError(BiotError, ValueError):
    pass


class OnSegmentError(BiotError, ValueError):
    """A Green's function evaluation point lies on a line segment."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class LinearSolveError(BiotError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class FixedStressDivergence(BiotError):
    def __init__(self, iterations, increment):
        super().__init__(
            f"Fixed-stress iteration did not converge in {iterations} iterations "
            f"(last increment {increment:.3e})"
        )
        self.iterations = iterations
        self.increment = increment
