"""Dataset characterisation and evaluation metrics for load disaggregation."""

from nilmcompare.errors import DataError
from nilmcompare.timeseries import (
    Gap,
    PowerSeries,
    detect_gaps,
    effective_duration,
    resample,
    sum_channels,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Gap",
    "PowerSeries",
    "detect_gaps",
    "effective_duration",
    "resample",
    "sum_channels",
    "__version__",
]
