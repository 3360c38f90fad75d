"""Exception types shared across the package."""


class LaggardError(Exception):
    """Base class for all package-specific errors."""


class DataError(LaggardError):
    """Invalid, missing, or inconsistent input data."""


class ShapeError(DataError):
    """Dimension mismatch between data components."""


class SpecError(LaggardError):
    """Inconsistent or unsupported model specification."""


class UnsupportedModelError(SpecError):
    """A model family or variant that is recognized but not implemented."""


class ArchiveError(LaggardError):
    """Unreadable or incompatible fit archive."""
