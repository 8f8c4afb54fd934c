"""Exception types shared across the toolkit."""


class ConfigurationError(ValueError):
    """Invalid parameters, tables or scenario configuration."""


class DegenerateSignalError(ValueError):
    """Quadrature sample carries no angle information (both channels zero)."""


class ModeMismatchError(ValueError):
    """Controller operation invoked with an incompatible controller mode."""


class InsufficientExcitationError(ValueError):
    """Signal magnitude too small for a reliable angle extraction."""


class UnderdeterminedFitError(ValueError):
    """Not enough distinct operating points to identify the fit."""


class ConvergenceError(RuntimeError):
    """Simulation failed to reach steady state within the time budget.

    Carries the best-effort window average as ``partial`` so sweeps can
    record the point instead of dropping it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
