"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class PercospecError(Exception):
    """Base class for all package errors."""


class ValidationError(PercospecError, ValueError):
    """Input violates a documented invariant; the message names it."""


class PreconditionError(PercospecError, ValueError):
    """An operation was called outside its documented domain."""


class ResourceError(PercospecError, RuntimeError):
    """A resource guard (size, dimension threshold) was exceeded."""


class InsufficientStatisticsError(PercospecError, RuntimeError):
    """Monte Carlo data too sparse to produce the requested estimate."""
