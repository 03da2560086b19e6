"""Exception hierarchy. The CLI maps each class to an exit code."""


class FracBoundError(Exception):
    """Base class for all package errors."""


class UsageError(FracBoundError, ValueError):
    """Invalid arguments: bad parameters, dimension mismatch, out-of-range level."""


class UnsupportedOperationError(FracBoundError):
    """Operation not defined for the given loss family or dimension."""


class IntegrityError(FracBoundError):
    """A scan file is truncated or fails its checksum."""


class VersionError(FracBoundError):
    """A scan file carries an unknown format or schema version."""


class ResourceError(FracBoundError):
    """Not enough memory (or other resources) to complete a scan."""
