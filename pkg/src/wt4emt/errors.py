"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class NonPositiveValue(SimError):
    """An element value that must be > 0 was not."""


class NonPositiveStep(NonPositiveValue):
    """A time step that must be > 0 was not."""


class StepOutOfRange(SimError):
    """A time step outside the range the model is specified for."""


class IsolatedNode(SimError):
    """A node is referenced by no branch or source."""


class SingularMatrix(SimError):
    """The nodal matrix is (numerically) singular."""


class DimensionMismatch(SimError):
    """A vector or matrix has the wrong shape for the system."""


class NoConvergence(SimError):
    """An iterative solve exhausted its iteration budget."""

    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


class ParseError(SimError):
    """A structured-text document could not be parsed."""


class ShapeMismatch(SimError):
    """Serialized weight matrices do not chain dimensionally."""


class UnknownActivation(SimError):
    """The weights file names an activation this engine does not implement."""


class DomainViolation(SimError):
    """A surrogate input left its trained range."""

    def __init__(self, feature, value, lo, hi):
        super().__init__(
            f"feature {feature!r} = {value:.9g} outside trained range [{lo:.9g}, {hi:.9g}]"
        )
        self.feature = feature
        self.value = value
        self.lo = lo
        self.hi = hi


class NoEquilibrium(SimError):
    """No steady-state operating point exists for the requested setpoints."""


class GridMismatch(SimError):
    """Two results cannot be compared because their time grids differ."""


class SimulationAbort(SimError):
    """A solver error occurred mid-run; carries the failing step."""

    def __init__(self, step, time, cause):
        super().__init__(f"aborted at step {step} (t = {time:.6g} s): {cause}")
        self.step = step
        self.time = time
        self.cause = cause
