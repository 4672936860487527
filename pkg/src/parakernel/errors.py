"""Exception hierarchy shared by every module of the package."""


class ParakernelError(Exception):
    """Base class for all library errors."""


class InvalidPath(ParakernelError, ValueError):
    """A coefficient path failed validation."""


class NonSymmetric(InvalidPath):
    pass


class EllipticityViolated(InvalidPath):
    def __init__(self, interval, eigenvalue, nu):
        self.interval = interval
        self.eigenvalue = eigenvalue
        self.nu = nu
        super().__init__(
            f"interval {interval}: eigenvalue {eigenvalue:.6g} outside "
            f"[{nu:.6g}, {1.0 / nu:.6g}]"
        )


class NonMonotoneBreakpoints(InvalidPath):
    pass


class EmptySpan(ParakernelError, ValueError):
    pass


class AmbiguousTime(ParakernelError, ValueError):
    """The coefficient value at a breakpoint is requested where it matters."""


class OrderTooHigh(ParakernelError, ValueError):
    pass


class QuadratureNotConverged(ParakernelError, ArithmeticError):
    def __init__(self, message, estimate=None, error=None):
        self.estimate = estimate
        self.error = error
        super().__init__(message)


class ModeUnavailable(ParakernelError, ValueError):
    pass


class TruncationTooSmall(ParakernelError, ArithmeticError):
    pass


class UnresolvedWeightSingularity(ParakernelError, ArithmeticError):
    pass


class DegenerateDenominator(ParakernelError, ZeroDivisionError):
    pass


class UnboundedRatio(ParakernelError, ArithmeticError):
    def __init__(self, direction, edge, slope):
        self.direction = direction
        self.edge = edge
        self.slope = slope
        super().__init__(
            f"ratio grows toward the {edge} edge of '{direction}' "
            f"(log-slope {slope:+.3f})"
        )


class InsufficientProbes(ParakernelError, ValueError):
    pass


class AxisMismatch(ParakernelError, ValueError):
    pass


class GhostEliminationSingular(ParakernelError, ValueError):
    pass


class LinearSolveFailure(ParakernelError, ArithmeticError):
    pass
