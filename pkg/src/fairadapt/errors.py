"""Exception types raised across the package."""


class FairAdaptError(Exception):
    """Base class for all package errors."""


class ShapeError(FairAdaptError, ValueError):
    pass


class DomainError(FairAdaptError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class UsageError(FairAdaptError, RuntimeError):
    """An API was called in the wrong state (e.g. backward on a foreign tape)."""


class SchemaError(FairAdaptError, ValueError):
    pass


class SplitError(FairAdaptError, ValueError):
    pass


class ConfigError(FairAdaptError, ValueError):
    pass


class FetchError(FairAdaptError, OSError):
    pass
