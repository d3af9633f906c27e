"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""


class AlphaRangeError(ValueError):
    """Exponent profile evaluated outside (0, 1]."""

    def __init__(self, z, value):
        self.z = z
        self.value = value
        super().__init__(f"alpha({z}) = {value} is outside (0, 1]")


class SingularityError(ValueError):
    """Weight evaluated inside the guard ball around the observer time."""


class QuadratureError(RuntimeError):
    """Quadrature failed to converge; carries the last value and error estimate."""

    def __init__(self, value, estimate, message=None):
        self.value = value
        self.estimate = estimate
        super().__init__(
            message or f"quadrature did not converge (value={value}, estimate={estimate})"
        )


class HyperregularityError(RuntimeError):
    """Velocity Hessian singular or Newton inversion of the momentum map failed."""


class SingularMetricError(RuntimeError):
    """Metric matrix not invertible at the queried configuration."""


class NumericAbortError(RuntimeError):
    """Integration produced a non-finite state component."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


class GridMismatchError(ValueError):
    """Trajectories do not share a compatible refinement grid."""
