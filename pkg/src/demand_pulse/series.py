"""Date-indexed daily series and the transformations shared by every analysis."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    EmptyWindow,
    NonMonotoneCumulative,
    NotContiguous,
    TooShort,
    ZeroRange,
    ZeroVariance,
)

DAY = np.timedelta64(1, "D")


def _as_day(d) -> np.datetime64:
    return np.datetime64(d, "D")


def to_date(d: np.datetime64) -> date:
    return d.astype("datetime64[D]").astype(date)


def format_float(v: float) -> str:
    """Shortest repr that round-trips exactly."""
    return repr(float(v))


@dataclass(frozen=True, eq=False)
class DateIndexedSeries:
    """An immutable (date -> value) sequence with strictly increasing dates.

    ``dates`` is a ``datetime64[D]`` array and ``values`` a float64 array of the
    same length; both are made read-only on construction. Gaps between dates
    are allowed (see :func:`fill_missing_dates`), duplicates and non-finite
    values are not.
    """

    label: str
    dates: np.ndarray
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]").copy()
        values = np.asarray(self.values, dtype=np.float64).copy()
        if dates.ndim != 1 or values.shape != dates.shape:
            raise ValueError("dates and values must be 1-D arrays of equal length")
        if len(dates) > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise ValueError(f"{self.label}: dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.label}: values must be finite")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, label: str, start, values: Iterable[float], unit: str = "") -> "DateIndexedSeries":
        vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
        dates = _as_day(start) + np.arange(len(vals)) * DAY
        return cls(label, dates, vals, unit)

    @classmethod
    def from_pairs(cls, label: str, pairs: Iterable[tuple], unit: str = "") -> "DateIndexedSeries":
        pairs = sorted(pairs, key=lambda p: p[0])
        dates = np.array([_as_day(d) for d, _ in pairs], dtype="datetime64[D]")
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return cls(label, dates, values, unit)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DateIndexedSeries):
            return NotImplemented
        return (
            self.label == other.label
            and self.unit == other.unit
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self) -> str:
        if len(self) == 0:
            return f"DateIndexedSeries({self.label!r}, empty)"
        return f"DateIndexedSeries({self.label!r}, {self.start}..{self.end}, n={len(self)})"

    @property
    def start(self) -> date:
        return to_date(self.dates[0])

    @property
    def end(self) -> date:
        return to_date(self.dates[-1])

    def items(self) -> Iterator[tuple[date, float]]:
        for d, v in zip(self.dates, self.values):
            yield to_date(d), float(v)

    def value_at(self, d) -> float:
        idx = np.searchsorted(self.dates, _as_day(d))
        if idx >= len(self.dates) or self.dates[idx] != _as_day(d):
            raise KeyError(d)
        return float(self.values[idx])

    def is_contiguous(self) -> bool:
        return len(self.dates) < 2 or bool(np.all(np.diff(self.dates) == DAY))

    def with_values(self, values, label: str | None = None) -> "DateIndexedSeries":
        return DateIndexedSeries(self.label if label is None else label, self.dates, values, self.unit)

    def relabel(self, label: str) -> "DateIndexedSeries":
        return DateIndexedSeries(label, self.dates, self.values, self.unit)

    # -- serialization -------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("date,value\n")
        for d, v in zip(self.dates, self.values):
            buf.write(f"{d},{format_float(v)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, label: str = "", unit: str = "") -> "DateIndexedSeries":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"date", "value"} <= set(reader.fieldnames):
            raise ValueError("series CSV must have header 'date,value'")
        pairs = [(date.fromisoformat(row["date"]), float(row["value"])) for row in reader]
        return cls.from_pairs(label, pairs, unit)

    def to_json_obj(self) -> dict:
        if not self.is_contiguous():
            raise NotContiguous(f"{self.label}: JSON form requires a contiguous series")
        return {
            "label": self.label,
            "unit": self.unit,
            "start_date": str(self.dates[0]) if len(self) else None,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DateIndexedSeries":
        if not obj["values"]:
            return cls(obj["label"], np.array([], dtype="datetime64[D]"), [], obj.get("unit", ""))
        return cls.from_values(obj["label"], obj["start_date"], obj["values"], obj.get("unit", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())


@dataclass(frozen=True)
class AnalysisPeriod:
    """Inclusive calendar-day window."""

    start: date
    end: date
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"period start {self.start} is after end {self.end}")

    @property
    def days(self) -> int:
        return (self.end - self.start).days + 1

    def __contains__(self, d) -> bool:
        return self.start <= d <= self.end


# Defaults: disaster proclamation to first vaccination, and the months after.
BEFORE_VACCINATION = AnalysisPeriod(date(2020, 3, 9), date(2020, 12, 15), "before")
AFTER_VACCINATION = AnalysisPeriod(date(2020, 12, 16), date(2021, 5, 31), "after")


def _require_nonempty(s: DateIndexedSeries) -> None:
    if len(s) == 0:
        raise EmptyInput(f"{s.label}: empty series")


def _require_contiguous(s: DateIndexedSeries) -> None:
    if not s.is_contiguous():
        raise NotContiguous(f"{s.label}: series has date gaps; call fill_missing_dates first")


def fill_missing_dates(s: DateIndexedSeries, fill: float = 0.0) -> DateIndexedSeries:
    """Insert every absent day between the first and last date with ``fill``."""
    _require_nonempty(s)
    n = int((s.dates[-1] - s.dates[0]) / DAY) + 1
    dates = s.dates[0] + np.arange(n) * DAY
    values = np.full(n, float(fill))
    values[((s.dates - s.dates[0]) / DAY).astype(np.int64)] = s.values
    return DateIndexedSeries(s.label, dates, values, s.unit)


def rolling_mean(s: DateIndexedSeries, window: int = 7) -> DateIndexedSeries:
    """Trailing mean over the current and ``window - 1`` preceding days.

    The first ``window - 1`` days average whatever is available, so the output
    keeps the input's date range.
    """
    _require_nonempty(s)
    _require_contiguous(s)
    x = s.values
    n = len(x)
    sums = np.zeros(n)
    counts = np.zeros(n)
    for k in range(min(window, n)):
        sums[k:] += x[: n - k]
        counts[k:] += 1.0
    return DateIndexedSeries(f"{s.label}_{window}d", s.dates, sums / counts, s.unit)


def rolling_mean_7(s: DateIndexedSeries) -> DateIndexedSeries:
    return rolling_mean(s, 7)


def restrict(s: DateIndexedSeries, p: AnalysisPeriod) -> DateIndexedSeries:
    lo, hi = _as_day(p.start), _as_day(p.end)
    mask = (s.dates >= lo) & (s.dates <= hi)
    if not mask.any():
        raise EmptyWindow(f"{s.label}: no data inside {p.start}..{p.end}")
    return DateIndexedSeries(s.label, s.dates[mask], s.values[mask], s.unit)


def zscore(s: DateIndexedSeries) -> DateIndexedSeries:
    """Standardize to mean 0 and population standard deviation 1."""
    if len(s) < 2:
        raise TooShort(f"{s.label}: zscore needs at least 2 values")
    x = s.values
    if np.ptp(x) == 0:
        raise ZeroVariance(f"{s.label}: constant series")
    centered = x - x.mean()
    centered = centered - centered.mean()
    out = centered / np.sqrt(np.mean(centered * centered))
    # one refinement pass pulls mean/std to within a few ulps
    out = out - out.mean()
    out = out / np.sqrt(np.mean(out * out))
    return s.with_values(out)


def minmax(s: DateIndexedSeries) -> DateIndexedSeries:
    _require_nonempty(s)
    lo, hi = float(s.values.min()), float(s.values.max())
    if hi == lo:
        raise ZeroRange(f"{s.label}: constant series")
    return s.with_values((s.values - lo) / (hi - lo))


def normalize(s: DateIndexedSeries, mode: str) -> DateIndexedSeries:
    if mode == "zscore":
        return zscore(s)
    if mode == "minmax":
        return minmax(s)
    if mode == "none":
        return s
    raise ValueError(f"unknown normalization mode {mode!r}")


def cumulative(s: DateIndexedSeries) -> DateIndexedSeries:
    _require_nonempty(s)
    _require_contiguous(s)
    return s.with_values(np.cumsum(s.values))


def daily_from_cumulative(s: DateIndexedSeries) -> DateIndexedSeries:
    """First differences, taking the first cumulative value as the first day's count."""
    _require_nonempty(s)
    _require_contiguous(s)
    daily = np.diff(s.values, prepend=0.0)
    if np.any(daily[1:] < 0):
        bad = int(np.argmax(daily[1:] < 0)) + 1
        raise NonMonotoneCumulative(
            f"{s.label}: cumulative value decreases on {s.dates[bad]} "
            f"({s.values[bad - 1]} -> {s.values[bad]})"
        )
    return s.with_values(daily)


def align_common_dates(a: DateIndexedSeries, b: DateIndexedSeries) -> tuple[DateIndexedSeries, DateIndexedSeries]:
    """Restrict both series to the dates they share."""
    common, ia, ib = np.intersect1d(a.dates, b.dates, assume_unique=True, return_indices=True)
    if len(common) == 0:
        raise EmptyWindow(f"{a.label} and {b.label} share no dates")
    return (
        DateIndexedSeries(a.label, common, a.values[ia], a.unit),
        DateIndexedSeries(b.label, common, b.values[ib], b.unit),
    )


def period_mean(s: DateIndexedSeries, p: AnalysisPeriod | None = None) -> float | None:
    """Mean of the entries present in ``p``; absent days are skipped, not zero.

    Returns None when nothing falls in the window.
    """
    if p is not None:
        try:
            s = restrict(s, p)
        except EmptyWindow:
            return None
    if len(s) == 0:
        return None
    return math.fsum(s.values) / len(s)


def describe(s: DateIndexedSeries) -> dict:
    """Mean, sample std, min, median and max (the descriptive-table columns)."""
    _require_nonempty(s)
    x = s.values
    return {
        "n": len(x),
        "mean": float(np.mean(x)),
        "std": float(np.std(x, ddof=1)) if len(x) > 1 else None,
        "min": float(np.min(x)),
        "median": float(np.median(x)),
        "max": float(np.max(x)),
    }


def date_range(start, end) -> np.ndarray:
    lo, hi = _as_day(start), _as_day(end)
    return lo + np.arange(int((hi - lo) / DAY) + 1) * DAY


def as_values(x: DateIndexedSeries | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(x, DateIndexedSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)
