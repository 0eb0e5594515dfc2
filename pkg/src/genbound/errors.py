"""Exception types shared across genbound."""


class GenboundError(Exception):
    """Base class for all genbound errors."""


class CapacityError(GenboundError):
    """An exhaustive enumeration would exceed the configured cap."""


class DimensionMismatchError(GenboundError, ValueError):
    """Two objects disagree on sample count or alphabet size."""


class DomainError(GenboundError, ValueError):
    """A formula was evaluated outside the parameter range it is valid for."""


class ValidationError(GenboundError, ValueError):
    """Input data (a mechanism table, a mixture spec, a file) is malformed."""


class EmptySupportError(GenboundError, ValueError):
    """A support mask selects no types."""
