"""Per-zone recovery metrics for the before/after vaccination comparison."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateX, EmptyWindow, ForeignZone, TooShort
from .ingest import ZoneInfo
from .series import AnalysisPeriod, DateIndexedSeries, format_float, restrict

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD_MI = 2.0


@dataclass(frozen=True)
class ZonePeriodMetrics:
    zone_id: int
    period: str
    total_trips: int
    trips_per_1000: float
    mean_distance: float | None
    active_days: int


def _in_period(s: DateIndexedSeries | None, p: AnalysisPeriod) -> DateIndexedSeries | None:
    if s is None:
        return None
    try:
        return restrict(s, p)
    except EmptyWindow:
        return None


def zone_period_metrics(
    counts: Mapping[int, DateIndexedSeries],
    mean_distances: Mapping[int, DateIndexedSeries],
    zones: Sequence[ZoneInfo],
    period: AnalysisPeriod,
) -> list[ZonePeriodMetrics]:
    """One record per known zone, totals taken over exactly ``period``.

    ``mean_distance`` is weighted by each day's trip count, i.e. it is the mean
    over all trips in the period. Zones with no population are skipped with a
    warning; zone ids in the data that are not in ``zones`` raise ForeignZone.
    """
    by_id = {z.id: z for z in zones}
    foreign = sorted(set(counts) - set(by_id))
    if foreign:
        raise ForeignZone(f"trip data references zones not in the zone table: {foreign}")
    out = []
    for zone in sorted(by_id.values(), key=lambda z: z.id):
        if zone.population <= 0:
            logger.warning("zone %d has no population; skipped in per-capita metrics", zone.id)
            continue
        c = _in_period(counts.get(zone.id), period)
        d = _in_period(mean_distances.get(zone.id), period)
        total = 0 if c is None else int(round(math.fsum(c.values)))
        active = 0 if c is None else int(np.count_nonzero(c.values))
        mean_distance = None
        if c is not None and d is not None and total > 0:
            weights = dict(zip(c.dates.tolist(), c.values.tolist()))
            num = math.fsum(v * weights.get(day, 0.0) for day, v in zip(d.dates.tolist(), d.values.tolist()))
            mean_distance = num / total
        out.append(
            ZonePeriodMetrics(zone.id, period.name, total, 1000.0 * total / zone.population, mean_distance, active)
        )
    return out


def zero_population_zones(zones: Iterable[ZoneInfo]) -> list[int]:
    return [z.id for z in zones if z.population <= 0]


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float | None
    n_points: int
    through_origin: bool = False

    def to_json_obj(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "through_origin": self.through_origin,
        }


def ols_fit(points: Sequence[tuple[float, float]], through_origin: bool = False) -> LinearFit:
    """Least-squares line of ``after`` on ``before``.

    With ``through_origin`` the intercept is pinned to zero and r^2 is measured
    against the uncentred total sum of squares, which keeps it in [0, 1].
    r^2 is None when every y is identical.
    """
    if len(points) < 2:
        raise TooShort("a linear fit needs at least 2 points")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if through_origin:
        sxx = float(np.dot(x, x))
        if sxx == 0:
            raise DegenerateX("all x values are zero")
        slope = float(np.dot(x, y)) / sxx
        intercept = 0.0
        ss_tot = float(np.dot(y, y))
    else:
        if np.ptp(x) == 0:
            raise DegenerateX("all x values are equal")
        dx = x - x.mean()
        dy = y - y.mean()
        slope = float(np.dot(dx, dy) / np.dot(dx, dx))
        intercept = float(y.mean() - slope * x.mean())
        ss_tot = float(np.dot(dy, dy))
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    if ss_tot == 0:
        r2 = None
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return LinearFit(slope, intercept, r2, len(points), through_origin)


class ChangeClass(str, Enum):
    INCREASED = "Increased"
    DECREASED = "Decreased"
    NOT_SIGNIFICANT = "NotSignificant"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class DistanceChange:
    zone_id: int | None
    before_mean: float | None
    after_mean: float | None
    change: ChangeClass
    threshold: float


def classify_distance_change(
    before: float | None,
    after: float | None,
    threshold: float = DEFAULT_THRESHOLD_MI,
    zone_id: int | None = None,
) -> DistanceChange:
    # strict inequality: a change of exactly the threshold is not significant
    if before is None or after is None:
        cls = ChangeClass.INDETERMINATE
    elif after - before > threshold:
        cls = ChangeClass.INCREASED
    elif before - after > threshold:
        cls = ChangeClass.DECREASED
    else:
        cls = ChangeClass.NOT_SIGNIFICANT
    return DistanceChange(zone_id, before, after, cls, threshold)


def _fmt(v) -> str:
    return "" if v is None else format_float(v)


def zone_metrics_csv(records: Iterable[ZonePeriodMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zone_id", "period", "total_trips", "trips_per_1000", "mean_distance", "active_days"])
    for r in records:
        w.writerow([r.zone_id, r.period, r.total_trips, _fmt(r.trips_per_1000), _fmt(r.mean_distance), r.active_days])
    return buf.getvalue()


def distance_change_csv(changes: Iterable[DistanceChange]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zone_id", "before_mean", "after_mean", "class", "threshold"])
    for c in changes:
        w.writerow([c.zone_id, _fmt(c.before_mean), _fmt(c.after_mean), c.change.value, _fmt(c.threshold)])
    return buf.getvalue()
