"""Exception types shared across the package."""


class GcmacError(Exception):
    """Base class for all errors raised by gcmac."""


class InvalidParameterError(GcmacError, ValueError):
    pass


class DegenerateChainError(GcmacError, ValueError):
    """Raised when a Markov chain has no unique stationary distribution."""


class UnattainableTargetError(GcmacError, ValueError):
    pass


class InsufficientCandidatesError(GcmacError, ValueError):
    pass


class UnstableQueueError(GcmacError, ValueError):
    """Raised when the offered traffic load is not below one."""


class NoFeasibleConfigurationError(GcmacError):
    """No (teams, team size) pair satisfies the optimisation constraints.

    ``constraint`` names the constraint that emptied the grid, one of
    ``"team-budget"``, ``"false-alarm"`` or ``"detection"``.
    """

    def __init__(self, constraint: str, message: str | None = None):
        self.constraint = constraint
        super().__init__(message or f"no feasible configuration: {constraint} constraint cannot be met")


class ConfigError(GcmacError, ValueError):
    """Configuration file problem; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
