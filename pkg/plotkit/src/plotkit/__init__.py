"""Figure rendering for cfsim CSV reports."""

__version__ = "0.1.0"

from .figures import plot_bars, plot_cdf, plot_timeseries  # noqa: F401
from .io import SchemaError, geo_mean_positive, read_slots, read_users  # noqa: F401
