"""Exception types shared across the package."""


class CpldynError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CpldynError):
    """Invalid configuration, parameters, or operation preconditions."""


class SingularStateError(CpldynError):
    """Vector-field evaluation requested at or below the V_d singularity guard."""


class ConvergenceError(CpldynError):
    """An iterative solver failed to converge."""


class StepSizeError(CpldynError):
    """Adaptive integration step size underflowed away from the CPL singularity."""


class CycleNotFoundError(CpldynError):
    """Reverse-time tracing did not converge onto a closed orbit."""


class BracketError(CpldynError):
    """A bisection bracket is invalid (same outcome at both ends, or no sign change)."""
