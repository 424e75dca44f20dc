"""Exception hierarchy shared by every module."""


class DynPricerError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(DynPricerError, ValueError):
    pass


class InfeasibleShrinkError(DynPricerError, ValueError):
    """Raised when shrinking a feasible set leaves it empty."""

    def __init__(self, coordinate, lower, upper):
        self.coordinate = int(coordinate)
        self.lower = float(lower)
        self.upper = float(upper)
        super().__init__(
            f"shrunk set is empty in coordinate {self.coordinate}: "
            f"lower {self.lower:.6g} > upper {self.upper:.6g}"
        )


class SingularGradientError(DynPricerError, ValueError):
    pass


class SolverFailureError(DynPricerError, RuntimeError):
    def __init__(self, message, residual=float("nan")):
        self.residual = float(residual)
        super().__init__(f"{message} (residual={self.residual:.3e})")


class BoundViolationError(DynPricerError, RuntimeError):
    """A descent premise (gradient or perturbation norm bound) was broken."""


class NotInducibleError(DynPricerError, ValueError):
    pass


class StructuralError(DynPricerError, RuntimeError):
    pass


class NotFittedError(DynPricerError, AttributeError):
    pass
