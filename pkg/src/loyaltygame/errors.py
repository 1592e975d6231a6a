"""Exception types shared by the solvers."""


class ThresholdOutsideSupport(ValueError):
    """A switching threshold fell where the shock density is zero."""


class UnsupportedDistribution(ValueError):
    """Closed forms were requested for a non-uniform loyalty shock."""


class AssumptionViolated(RuntimeError):
    """The unconstrained Markov solution breaks the price-ordering constraints.

    ``solution`` holds whatever the solver recovered, for diagnostics.
    """

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class NoConvergence(RuntimeError):
    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last
