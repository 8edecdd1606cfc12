"""Exception hierarchy shared across the package."""


class GlaciaError(Exception):
    """Base class for all package errors."""


class ConfigError(GlaciaError, ValueError):
    """A parameter set violates one of its type invariants."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DomainError(GlaciaError, ValueError):
    """A state lies outside the domain where the model equations are defined."""


class NullclineRangeError(GlaciaError, ValueError):
    """No nullcline point exists at the requested abscissa."""


class NoIceSheetError(NullclineRangeError):
    """The ice-extent nullcline does not exist (snow line too high)."""


class AssumptionError(GlaciaError, ValueError):
    """Geometric assumptions required by an analysis step do not hold."""


class SingularIntegrandError(GlaciaError, ArithmeticError):
    """The period integrand denominator vanishes on the integration interval."""


class IntegrationError(GlaciaError, RuntimeError):
    """The ODE integrator could not complete the requested span."""

    def __init__(self, msg: str, t_last: float | None = None, y_last=None):
        super().__init__(msg)
        self.t_last = t_last
        self.y_last = y_last


class ConvergenceError(GlaciaError, RuntimeError):
    """A limit-cycle measurement did not settle within its return budget."""

    def __init__(self, msg: str, intervals=None):
        super().__init__(msg)
        self.intervals = list(intervals) if intervals is not None else []
