"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


class InconsistentBidError(ValueError):
    """A bid that cannot be rationalized as a minimax-loss bid."""


class ConvergenceError(RuntimeError):
    """A numerical routine failed to bracket or converge."""


class ConfigError(ValueError):
    """Invalid simulation or solver configuration."""
