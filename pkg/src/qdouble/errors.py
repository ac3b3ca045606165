"""Exception hierarchy shared across modules."""


class QDoubleError(Exception):
    """Base class for all package errors."""


class GroupValidationError(QDoubleError):
    pass


class IrrepError(QDoubleError):
    pass


class LatticeError(QDoubleError):
    pass


class RibbonError(QDoubleError):
    pass


class StateError(QDoubleError):
    pass


class CapacityError(QDoubleError):
    """Raised when an enumeration or dense representation exceeds the budget."""


class PartitionError(QDoubleError):
    pass


class ConfigError(QDoubleError):
    pass


class DegenerateError(QDoubleError):
    pass
