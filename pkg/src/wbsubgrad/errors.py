"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid input graph, schedule, or experiment configuration."""


class NotStronglyConnectedError(ConfigurationError):
    """The graph has an ordered pair of nodes with no directed path."""


class InitializationError(RuntimeError):
    """A self-coefficient ``1 - w_i d_i^out`` dropped to zero or below."""


class SubgradientBoundError(RuntimeError):
    """A visited subgradient exceeded the declared bound L."""


class NonConvergenceError(RuntimeError):
    """Weight balancing did not reach the tolerance within ``max_rounds``."""


class SynchronyError(RuntimeError):
    """A node's inbox is missing a sender or holds a duplicate message."""


class EquivalenceError(RuntimeError):
    """The message-passing run and the centralized run disagree."""


class BoundViolationError(RuntimeError):
    """A measured quantity exceeded its theoretical right-hand side."""
