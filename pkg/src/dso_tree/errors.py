"""Exception hierarchy shared by the library and the CLI."""


class DsoTreeError(Exception):
    """Base class for all library errors."""


class ValidationError(DsoTreeError, ValueError):
    """Malformed network or scenario data."""


class CycleError(ValidationError):
    pass


class CapacityError(ValidationError):
    """A node's incoming capacity exceeds its outgoing capacity."""


class DemandError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class NonMonotoneError(DsoTreeError):
    """A recovered bottleneck arrival time is not strictly increasing."""


class InfeasibleInputError(DsoTreeError):
    pass


class HorizonError(DsoTreeError):
    pass


class TransformError(DsoTreeError):
    """The queue-free reconstruction did not re-simulate cleanly."""


class InfeasibleError(DsoTreeError):
    """The demand cannot be routed within the horizon."""


class SolverError(DsoTreeError):
    pass


class TooLargeError(DsoTreeError):
    pass


class SamplingError(DsoTreeError):
    pass
