"""Exception hierarchy shared by every module."""


class SparsemixError(Exception):
    """Base class for library errors."""


class ConfigError(SparsemixError, ValueError):
    """Invalid user input: bad parameters, malformed configs, missing fields."""


class ParameterError(ConfigError):
    """A model parameter violates its stated constraint."""


class UnsupportedOperation(SparsemixError):
    """The operation's hypotheses do not hold for this input (e.g. non-convex rate)."""


class ComputationError(SparsemixError):
    """A numeric routine could not produce a valid answer."""
