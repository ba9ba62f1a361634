"""Exception hierarchy shared by all lppgeo modules."""


class LppError(Exception):
    """Base class for all lppgeo errors."""


class DomainError(LppError):
    """An argument lies outside the domain an operation is defined on."""


class OrderError(DomainError):
    """Endpoints are not ordered by the coordinatewise partial order."""


class NoPathError(LppError):
    """The requested endpoint is unreachable on the given surface."""


class CapacityError(LppError):
    """A requested computation exceeds a configured memory/size budget."""


class InsufficientDataError(LppError):
    """Not enough usable data rows to run an estimator."""


class ParameterError(LppError):
    """Degenerate or out-of-range model parameters."""
