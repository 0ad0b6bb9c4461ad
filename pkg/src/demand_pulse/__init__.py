"""Correlation toolkit for taxi-demand recovery against epidemic and vaccination series."""

__version__ = "0.1.0"

from .correlation import CorrelationMatrix, correlation_matrix, pearson  # noqa: E402
from .dtw import DtwResult, WarpingPath, dtw, dtw_distance, pointwise_cost  # noqa: E402
from .lag import TlccProfile, interpret, tlcc_at, tlcc_sweep  # noqa: E402
from .series import (  # noqa: E402
    AnalysisPeriod,
    DateIndexedSeries,
    align_common_dates,
    cumulative,
    daily_from_cumulative,
    fill_missing_dates,
    minmax,
    restrict,
    rolling_mean_7,
    zscore,
)
from .spatial import classify_distance_change, ols_fit, zone_period_metrics  # noqa: E402

__all__ = [
    "AnalysisPeriod",
    "CorrelationMatrix",
    "DateIndexedSeries",
    "DtwResult",
    "TlccProfile",
    "WarpingPath",
    "align_common_dates",
    "classify_distance_change",
    "correlation_matrix",
    "cumulative",
    "daily_from_cumulative",
    "dtw",
    "dtw_distance",
    "fill_missing_dates",
    "interpret",
    "minmax",
    "ols_fit",
    "pearson",
    "pointwise_cost",
    "restrict",
    "rolling_mean_7",
    "tlcc_at",
    "tlcc_sweep",
    "zone_period_metrics",
    "zscore",
]
