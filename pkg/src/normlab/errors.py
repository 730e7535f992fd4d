"""Exception types shared across the package."""


class NormlabError(Exception):
    """Base class for all errors raised by normlab."""


class ShapeError(NormlabError, ValueError):
    """Tensor shapes are incompatible (dimension error)."""


class ConfigError(NormlabError, ValueError):
    """Invalid configuration value or combination of values."""


class StatisticsError(NormlabError, ValueError):
    """Too few elements to estimate normalization statistics."""


class DataError(NormlabError, ValueError):
    """Dataset content is missing, inconsistent or out of range."""


class FormatError(DataError):
    """A file does not follow its expected binary or text layout."""


class UsageError(NormlabError, RuntimeError):
    """An API was called in a state where it cannot run."""


class NonFiniteError(NormlabError, FloatingPointError):
    """A NaN or infinity appeared during training.

    ``site`` names the first module whose output was non-finite.
    """

    def __init__(self, message: str, site: str | None = None):
        super().__init__(message)
        self.site = site
