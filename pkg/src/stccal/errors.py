"""Exception hierarchy shared by all modules."""


class STCCAError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(STCCAError, ValueError):
    """Array shapes or extents are incompatible."""


class ParameterError(STCCAError, ValueError):
    """A scalar parameter is outside its valid range."""


class ConfigError(STCCAError, ValueError):
    """A configuration object or file violates its schema."""


class DatasetError(STCCAError, ValueError):
    """Multi-view data is inconsistent (sample counts, labels, files)."""


class DataError(STCCAError, ValueError):
    """Numeric input contains non-finite values."""


class RankError(STCCAError, ValueError):
    """A matrix is rank deficient in the metric where full rank is required."""


class NumericError(STCCAError, ArithmeticError):
    """A linear solve or factorization failed."""
