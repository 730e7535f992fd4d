"""normlab: a numpy tensor engine and experiment harness for batch, instance,
squeeze-excitation and instance-enhanced batch normalization."""
from .errors import (ConfigError, DataError, FormatError, NonFiniteError, NormlabError,
                     ShapeError, StatisticsError, UsageError)

__version__ = "0.1.0"

__all__ = [
    "NormlabError", "ShapeError", "ConfigError", "StatisticsError", "DataError",
    "FormatError", "UsageError", "NonFiniteError", "__version__",
]
