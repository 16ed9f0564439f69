"""Uncertainty quantification benchmark for time-series regression."""
from .errors import (
    ConfigurationError,
    FormatError,
    InvalidArgumentError,
    NumericError,
    TrainingDivergedError,
    UndefinedMetricError,
    WrongMethodError,
)
from .ndcore import RngStream

__version__ = "0.1.0"
