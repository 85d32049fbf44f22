"""Exception hierarchy shared by all modules."""


class QTransferError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class BoundsError(QTransferError):
    """A mode label or amplitude falls outside the truncated space."""


class EmptyStateError(QTransferError):
    pass


class SpaceMismatchError(QTransferError):
    pass


class NormalizationError(QTransferError):
    pass


class TopologyError(QTransferError):
    """Path wiring is not a bijection or the space has too few paths."""


class ConfigurationError(QTransferError):
    pass


class NonInvertibleError(QTransferError):
    pass


class RangeError(QTransferError):
    pass
