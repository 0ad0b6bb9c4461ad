"""Parsing, cleaning and daily aggregation of the four source datasets.

Trip files are processed as streams: :func:`parse_trips` yields one item per
CSV row, :func:`clean_trips` filters them, and :class:`DailyAccumulator`
reduces the survivors to per-day counts and distance sums. Nothing holds more
than one row of the trip file in memory.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, fields
from datetime import date, datetime
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

from .errors import (
    DataError,
    DuplicateDate,
    MissingDates,
    NonMonotoneCumulative,
    SchemaError,
)
from .series import DateIndexedSeries, date_range, fill_missing_dates

logger = logging.getLogger(__name__)

N_ZONES = 77
MIN_YEAR, MAX_YEAR = 2018, 2021
MIN_DURATION_S = 60.0
MIN_DISTANCE_MI = 0.5

COMMUNITY_AREAS = {
    1: "Rogers Park", 2: "West Ridge", 3: "Uptown", 4: "Lincoln Square",
    5: "North Center", 6: "Lake View", 7: "Lincoln Park", 8: "Near North Side",
    9: "Edison Park", 10: "Norwood Park", 11: "Jefferson Park", 12: "Forest Glen",
    13: "North Park", 14: "Albany Park", 15: "Portage Park", 16: "Irving Park",
    17: "Dunning", 18: "Montclare", 19: "Belmont Cragin", 20: "Hermosa",
    21: "Avondale", 22: "Logan Square", 23: "Humboldt Park", 24: "West Town",
    25: "Austin", 26: "West Garfield Park", 27: "East Garfield Park",
    28: "Near West Side", 29: "North Lawndale", 30: "South Lawndale",
    31: "Lower West Side", 32: "Loop", 33: "Near South Side", 34: "Armour Square",
    35: "Douglas", 36: "Oakland", 37: "Fuller Park", 38: "Grand Boulevard",
    39: "Kenwood", 40: "Washington Park", 41: "Hyde Park", 42: "Woodlawn",
    43: "South Shore", 44: "Chatham", 45: "Avalon Park", 46: "South Chicago",
    47: "Burnside", 48: "Calumet Heights", 49: "Roseland", 50: "Pullman",
    51: "South Deering", 52: "East Side", 53: "West Pullman", 54: "Riverdale",
    55: "Hegewisch", 56: "Garfield Ridge", 57: "Archer Heights",
    58: "Brighton Park", 59: "McKinley Park", 60: "Bridgeport", 61: "New City",
    62: "West Elsdon", 63: "Gage Park", 64: "Clearing", 65: "West Lawn",
    66: "Chicago Lawn", 67: "West Englewood", 68: "Englewood",
    69: "Greater Grand Crossing", 70: "Ashburn", 71: "Auburn Gresham",
    72: "Beverly", 73: "Washington Heights", 74: "Mount Greenwood",
    75: "Morgan Park", 76: "O'Hare", 77: "Edgewater",
}


# ---------------------------------------------------------------------------
# value parsing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def parse_timestamp(text: str) -> datetime:
    """Parse ``MM/DD/YYYY hh:mm:ss AM/PM`` (portal export) or ISO-8601.

    Cached: portal timestamps are rounded to 15 minutes, so the set of
    distinct strings is small compared with the row count.
    """
    s = text.strip()
    if len(s) == 22 and s[2] == "/" and s[5] == "/":
        month, day, year = int(s[0:2]), int(s[3:5]), int(s[6:10])
        hour, minute, second = int(s[11:13]), int(s[14:16]), int(s[17:19])
        ampm = s[20:22].upper()
        if not 1 <= hour <= 12 or ampm not in ("AM", "PM"):
            raise ValueError(f"bad 12-hour clock value {text!r}")
        hour = hour % 12 + (12 if ampm == "PM" else 0)
        return datetime(year, month, day, hour, minute, second)
    return datetime.fromisoformat(s.replace("Z", "").replace("T", " "))


def parse_date(text: str) -> date:
    s = text.strip()
    if "/" in s:
        part = s.split()[0]
        month, day, year = part.split("/")
        return date(int(year), int(month), int(day))
    return date.fromisoformat(s[:10])


def _parse_number(text: str) -> float:
    return float(text.replace(",", ""))


def _parse_zone(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"non-integer zone id {text!r}")
    return int(v)


# ---------------------------------------------------------------------------
# trips
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TripSchema:
    """Maps logical trip fields to CSV column names; ``fare`` may be None."""

    start: str = "Trip Start Timestamp"
    end: str = "Trip End Timestamp"
    duration: str = "Trip Seconds"
    distance: str = "Trip Miles"
    pickup: str = "Pickup Community Area"
    dropoff: str = "Dropoff Community Area"
    fare: str | None = "Trip Total"

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "TripSchema":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise SchemaError(f"unknown trip schema keys: {sorted(unknown)}")
        return cls(**{k: (v or None) for k, v in mapping.items()})

    def required(self) -> dict[str, str]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "fare"}


@dataclass(slots=True)
class RawTrip:
    """One parsed trip row before cleaning; absent fields are None."""

    line: int
    start: datetime | None
    end: datetime | None
    duration: float | None
    distance: float | None
    pickup: int | None
    dropoff: int | None
    fare: float | None = None


@dataclass(slots=True)
class RowError:
    """In-band parse failure.

    ``field`` names the first offending field; ``partial`` carries the row with
    every unusable field set to None so the cleaning rules can still charge
    the row to the right rule.
    """

    line: int
    field: str
    value: str
    reason: str
    partial: RawTrip


@dataclass(frozen=True, slots=True)
class TripRecord:
    start: datetime
    end: datetime
    duration: float
    distance: float
    pickup_zone: int
    dropoff_zone: int
    fare: float | None = None

    @property
    def day(self) -> date:
        return self.start.date()


_TIMESTAMP_FIELDS = ("start", "end")
_NUMBER_FIELDS = ("duration", "distance", "fare")
_ZONE_FIELDS = ("pickup", "dropoff")


def parse_trips(stream: TextIO, schema: TripSchema | None = None) -> Iterator[RawTrip | RowError]:
    """Stream raw trip rows from ``stream``.

    The header is validated immediately (:class:`SchemaError` on a missing
    column); rows are parsed lazily. Missing or malformed timestamps and
    malformed numbers come back as :class:`RowError` items instead of raising.
    Empty numeric or zone cells become None.
    """
    schema = schema or TripSchema()
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("trip file has no header row") from None
    index = {name.strip(): i for i, name in enumerate(header)}
    missing = [col for col in schema.required().values() if col not in index]
    if missing:
        raise SchemaError(f"trip file is missing columns: {missing}")
    cols = {name: index[col] for name, col in schema.required().items()}
    if schema.fare is not None and schema.fare in index:
        cols["fare"] = index[schema.fare]
    return _iter_trips(reader, cols)


def _iter_trips(reader, cols: dict[str, int]) -> Iterator[RawTrip | RowError]:
    for row in reader:
        if not row:
            continue
        lineno = reader.line_num
        parsed = {}
        first_error = None
        for name, i in cols.items():
            text = row[i].strip() if i < len(row) else ""
            value = None
            try:
                if name in _TIMESTAMP_FIELDS:
                    if not text:
                        raise ValueError("missing timestamp")
                    value = parse_timestamp(text)
                elif text:
                    value = _parse_zone(text) if name in _ZONE_FIELDS else _parse_number(text)
            except ValueError as exc:
                if first_error is None:
                    first_error = (name, text, str(exc))
            parsed[name] = value
        raw = RawTrip(line=lineno, **parsed)
        if first_error is None:
            yield raw
        else:
            yield RowError(lineno, first_error[0], first_error[1], first_error[2], raw)


RULES = (
    "timestamps_present",
    "year_range",
    "start_before_end",
    "min_duration",
    "min_distance",
    "zones_valid",
)


@dataclass
class CleaningReport:
    rows_in: int = 0
    rows_out: int = 0
    rejected_per_rule: dict[str, int] = field(default_factory=lambda: dict.fromkeys(RULES, 0))
    parse_errors: int = 0

    @property
    def rejected(self) -> int:
        return sum(self.rejected_per_rule.values())

    def check(self) -> None:
        if self.rows_in != self.rows_out + self.rejected:
            from .errors import InvariantViolation

            raise InvariantViolation(
                f"cleaning accounting broken: {self.rows_in} != {self.rows_out} + {self.rejected}"
            )

    def merge(self, other: "CleaningReport") -> "CleaningReport":
        return CleaningReport(
            self.rows_in + other.rows_in,
            self.rows_out + other.rows_out,
            {r: self.rejected_per_rule[r] + other.rejected_per_rule[r] for r in RULES},
            self.parse_errors + other.parse_errors,
        )

    def to_json_obj(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "rejected_per_rule": {r: self.rejected_per_rule[r] for r in RULES},
            "parse_errors": self.parse_errors,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CleaningReport":
        return cls(obj["rows_in"], obj["rows_out"], dict(obj["rejected_per_rule"]), obj.get("parse_errors", 0))


def violated_rule(raw: RawTrip) -> str | None:
    """Name of the first cleaning rule ``raw`` breaks, or None if it passes all six."""
    if raw.start is None or raw.end is None:
        return "timestamps_present"
    if not (MIN_YEAR <= raw.start.year <= MAX_YEAR and MIN_YEAR <= raw.end.year <= MAX_YEAR):
        return "year_range"
    if not raw.start < raw.end:
        return "start_before_end"
    duration = raw.duration if raw.duration is not None else (raw.end - raw.start).total_seconds()
    if not duration > MIN_DURATION_S:
        return "min_duration"
    if raw.distance is None or not raw.distance > MIN_DISTANCE_MI:
        return "min_distance"
    for zone in (raw.pickup, raw.dropoff):
        if zone is None or not 1 <= zone <= N_ZONES:
            return "zones_valid"
    return None


def clean_trips(rows: Iterable[RawTrip | RowError]) -> tuple[Iterator[TripRecord], CleaningReport]:
    """Apply the six cleaning rules in order.

    Returns a lazy stream of survivors and a report that fills in as the
    stream is consumed; read the report only after exhausting the stream.
    """
    report = CleaningReport()

    def _gen():
        for item in rows:
            report.rows_in += 1
            if isinstance(item, RowError):
                report.parse_errors += 1
                raw = item.partial
            else:
                raw = item
            rule = violated_rule(raw)
            if rule is not None:
                report.rejected_per_rule[rule] += 1
                continue
            report.rows_out += 1
            duration = raw.duration if raw.duration is not None else (raw.end - raw.start).total_seconds()
            yield TripRecord(raw.start, raw.end, duration, raw.distance, raw.pickup, raw.dropoff, raw.fare)

    return _gen(), report


# ---------------------------------------------------------------------------
# daily aggregation
# ---------------------------------------------------------------------------

CITY = "city"
KEY_MODES = ("city", "pickup_zone", "od_pair")

_MICRO = 1_000_000


class DailyAccumulator:
    """Order-independent reduction of trips to per-day counts and distance sums.

    Distances are summed as integer micro-miles so that the totals, and the
    means derived from them, do not depend on the order trips arrive in or on
    how the input was sharded.
    """

    def __init__(self, track_od: bool = False):
        self.track_od = track_od
        self.zone_counts: dict[tuple[date, int], int] = {}
        self.zone_distance: dict[tuple[date, int], int] = {}
        self.od_counts: dict[tuple[date, int, int], int] = {}
        self.first_day: date | None = None
        self.last_day: date | None = None

    def add(self, trip: TripRecord) -> None:
        day = trip.start.date()
        key = (day, trip.pickup_zone)
        self.zone_counts[key] = self.zone_counts.get(key, 0) + 1
        self.zone_distance[key] = self.zone_distance.get(key, 0) + round(trip.distance * _MICRO)
        if self.track_od:
            od = (day, trip.pickup_zone, trip.dropoff_zone)
            self.od_counts[od] = self.od_counts.get(od, 0) + 1
        if self.first_day is None or day < self.first_day:
            self.first_day = day
        if self.last_day is None or day > self.last_day:
            self.last_day = day

    def consume(self, trips: Iterable[TripRecord]) -> "DailyAccumulator":
        for t in trips:
            self.add(t)
        return self

    def merge(self, other: "DailyAccumulator") -> "DailyAccumulator":
        out = DailyAccumulator(self.track_od and other.track_od)
        for src in (self, other):
            for k, v in src.zone_counts.items():
                out.zone_counts[k] = out.zone_counts.get(k, 0) + v
            for k, v in src.zone_distance.items():
                out.zone_distance[k] = out.zone_distance.get(k, 0) + v
            if out.track_od:
                for k, v in src.od_counts.items():
                    out.od_counts[k] = out.od_counts.get(k, 0) + v
        days = [d for d in (self.first_day, other.first_day, self.last_day, other.last_day) if d is not None]
        if days:
            out.first_day, out.last_day = min(days), max(days)
        return out

    def is_empty(self) -> bool:
        return self.first_day is None

    def _grouped(self, table: Mapping[tuple, int], key: str) -> dict:
        out: dict = {}
        for k, v in table.items():
            if key == CITY:
                group = CITY
            elif key == "pickup_zone":
                group = k[1]
            elif key == "od_pair":
                group = (k[1], k[2])
            else:
                raise ValueError(f"unknown aggregation key {key!r}")
            bucket = out.setdefault(group, {})
            bucket[k[0]] = bucket.get(k[0], 0) + v
        return dict(sorted(out.items(), key=lambda kv: _key_sort(kv[0])))

    def counts(self, key: str = CITY) -> dict:
        """Trip counts per group, zero-filled over the observed date range."""
        if key not in KEY_MODES:
            raise ValueError(f"unknown aggregation key {key!r}")
        if self.is_empty():
            return {}
        if key == "od_pair" and not self.track_od:
            raise ValueError("accumulator was built without origin-destination tracking")
        table = self.od_counts if key == "od_pair" else self.zone_counts
        days = date_range(self.first_day, self.last_day)
        out = {}
        for group, per_day in self._grouped(table, key).items():
            s = DateIndexedSeries.from_pairs(series_label(group), per_day.items(), unit="trips")
            s = fill_missing_dates(s, 0.0)
            out[group] = _extend(s, days)
        return out

    def mean_distance(self, key: str = CITY) -> dict:
        """Mean trip distance per group per day; days without trips are absent."""
        if key not in (CITY, "pickup_zone"):
            raise ValueError(f"mean distance supports city or pickup_zone keys, not {key!r}")
        sums = self._grouped(self.zone_distance, key)
        counts = self._grouped(self.zone_counts, key)
        out = {}
        for group, per_day in sums.items():
            pairs = [(d, per_day[d] / counts[group][d] / _MICRO) for d in per_day]
            out[group] = DateIndexedSeries.from_pairs(series_label(group) + "_mean_distance", pairs, unit="miles")
        return out


def _extend(s: DateIndexedSeries, days: np.ndarray) -> DateIndexedSeries:
    if len(s) == len(days):
        return s
    values = np.zeros(len(days))
    offset = int((s.dates[0] - days[0]) / np.timedelta64(1, "D"))
    values[offset : offset + len(s)] = s.values
    return DateIndexedSeries(s.label, days, values, s.unit)


def _key_sort(k):
    if k == CITY:
        return (0, ())
    if isinstance(k, tuple):
        return (2, k)
    return (1, (k,))


def series_label(key) -> str:
    if key == CITY:
        return "taxi_trips"
    if isinstance(key, tuple):
        return f"od_{key[0]}_{key[1]}"
    return f"zone_{key}"


def aggregate_daily(trips: Iterable[TripRecord], key: str = CITY) -> dict:
    """Daily trip counts keyed by ``city``, pickup zone id, or (pickup, dropoff)."""
    if key not in KEY_MODES:
        raise ValueError(f"unknown aggregation key {key!r}")
    return DailyAccumulator(track_od=key == "od_pair").consume(trips).counts(key)


def daily_mean_distance(trips: Iterable[TripRecord], key: str = CITY) -> dict:
    return DailyAccumulator().consume(trips).mean_distance(key)


def keyed_series_to_csv(mapping: Mapping, out: TextIO) -> None:
    """Write ``date,key,value`` rows, keys in the mapping's order."""
    from .series import format_float

    out.write("date,key,value\n")
    for key, s in mapping.items():
        k = key if isinstance(key, str) else (f"{key[0]}-{key[1]}" if isinstance(key, tuple) else str(key))
        for d, v in zip(s.dates, s.values):
            out.write(f"{d},{k},{format_float(v)}\n")


def keyed_series_from_csv(stream: TextIO, unit: str = "") -> dict:
    """Inverse of :func:`keyed_series_to_csv`; integer-looking keys become ints."""
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or reader.fieldnames[:3] != ["date", "key", "value"]:
        raise SchemaError("expected header 'date,key,value'")
    grouped: dict = {}
    for row in reader:
        k = row["key"]
        if k.isdigit():
            k = int(k)
        elif "-" in k and all(p.isdigit() for p in k.split("-")):
            k = tuple(int(p) for p in k.split("-"))
        grouped.setdefault(k, []).append((date.fromisoformat(row["date"]), float(row["value"])))
    out = {}
    for k, pairs in grouped.items():
        label = k if isinstance(k, str) and k != CITY else series_label(k)
        out[k] = DateIndexedSeries.from_pairs(label, pairs, unit)
    return out


# ---------------------------------------------------------------------------
# epidemic, vaccination, zones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpidemicDaily:
    date: date
    new_cases: int
    new_hospitalizations: int
    new_deaths: int
    cum_cases: int
    cum_hospitalizations: int
    cum_deaths: int


@dataclass(frozen=True)
class VaccinationDaily:
    date: date
    new_first: int
    new_second: int
    new_total: int
    cum_first: int
    cum_second: int
    cum_total: int


EPIDEMIC_COLUMNS = {
    "date": "date",
    "new_cases": "new_cases",
    "new_hospitalizations": "new_hospitalizations",
    "new_deaths": "new_deaths",
    "cum_cases": "cum_cases",
    "cum_hospitalizations": "cum_hospitalizations",
    "cum_deaths": "cum_deaths",
}

VACCINATION_COLUMNS = {
    "date": "date",
    "new_first": "new_first",
    "new_second": "new_second",
    "new_total": "new_total",
    "cum_first": "cum_first",
    "cum_second": "cum_second",
    "cum_total": "cum_total",
}

_PAIRS = {
    EpidemicDaily: (("new_cases", "cum_cases"), ("new_hospitalizations", "cum_hospitalizations"), ("new_deaths", "cum_deaths")),
    VaccinationDaily: (("new_first", "cum_first"), ("new_second", "cum_second"), ("new_total", "cum_total")),
}


def _parse_count(text: str, what: str, line: int) -> int:
    text = text.strip()
    if not text:
        return 0
    try:
        v = _parse_number(text)
    except ValueError:
        raise DataError(f"line {line}: malformed {what} value {text!r}") from None
    if v < 0 or not float(v).is_integer():
        raise DataError(f"line {line}: {what} must be a non-negative integer, got {text!r}")
    return int(v)


def _parse_daily(stream: TextIO, cls, defaults: dict, columns: Mapping[str, str] | None):
    columns = {**defaults, **(columns or {})}
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise SchemaError(f"{cls.__name__}: file has no header row")
    header = {h.strip() for h in reader.fieldnames}
    pairs = _PAIRS[cls]
    derived = set()
    for name, col in columns.items():
        if col not in header:
            if name.startswith("cum_") and columns[dict((c, n) for n, c in pairs)[name]] in header:
                derived.add(name)
            else:
                raise SchemaError(f"{cls.__name__}: missing column {col!r} (for {name})")
    rows = []
    seen: dict[date, int] = {}
    for line, row in enumerate(reader, start=2):
        row = {k.strip(): v for k, v in row.items() if k is not None}
        try:
            d = parse_date(row.get(columns["date"]) or "")
        except (ValueError, IndexError):
            raise DataError(f"line {line}: malformed date {row.get(columns['date'])!r}") from None
        if d in seen:
            raise DuplicateDate(f"date {d} appears on lines {seen[d]} and {line}")
        seen[d] = line
        values = {
            name: _parse_count(row.get(col) or "", name, line)
            for name, col in columns.items()
            if name != "date" and name not in derived
        }
        rows.append((d, line, values))
    rows.sort(key=lambda r: r[0])
    for (d0, _, _), (d1, line, _) in zip(rows, rows[1:]):
        if (d1 - d0).days != 1:
            raise MissingDates(f"{cls.__name__}: no data between {d0} and {d1} (line {line})")
    running = dict.fromkeys(derived, 0)
    out = []
    prev = None
    for d, line, values in rows:
        for new, cum in pairs:
            if cum in derived:
                running[cum] += values[new]
                values[cum] = running[cum]
        rec = cls(date=d, **values)
        if prev is not None:
            for _, cum in pairs:
                if getattr(rec, cum) < getattr(prev, cum):
                    raise NonMonotoneCumulative(
                        f"{cum} decreases on {d} ({getattr(prev, cum)} -> {getattr(rec, cum)}, line {line})"
                    )
        out.append(rec)
        prev = rec
    return out


def parse_epidemic(stream: TextIO, columns: Mapping[str, str] | None = None) -> list[EpidemicDaily]:
    """Parse daily epidemic counts, date-sorted and validated.

    A ``cum_*`` column absent from the file is derived as the running sum of
    its daily column.
    """
    return _parse_daily(stream, EpidemicDaily, EPIDEMIC_COLUMNS, columns)


def parse_vaccination(stream: TextIO, columns: Mapping[str, str] | None = None) -> list[VaccinationDaily]:
    return _parse_daily(stream, VaccinationDaily, VACCINATION_COLUMNS, columns)


EPIDEMIC_LABELS = {
    "new_cases": "new_cases",
    "new_hospitalizations": "new_hospitalizations",
    "new_deaths": "new_deaths",
    "cum_cases": "cum_cases",
    "cum_hospitalizations": "cum_hospitalizations",
    "cum_deaths": "cum_deaths",
}

VACCINATION_LABELS = {
    "new_first": "new_first_dose",
    "new_second": "new_second_dose",
    "new_total": "new_total_dose",
    "cum_first": "cum_first_dose",
    "cum_second": "cum_second_dose",
    "cum_total": "cum_total_dose",
}


def records_to_series(records: list, labels: Mapping[str, str]) -> dict[str, DateIndexedSeries]:
    """One series per field of the daily records, keyed by output label."""
    if not records:
        return {}
    start = records[0].date
    out = {}
    for attr, label in labels.items():
        out[label] = DateIndexedSeries.from_values(
            label, start, [getattr(r, attr) for r in records], unit="people"
        )
    return out


@dataclass(frozen=True)
class ZoneInfo:
    id: int
    name: str
    population: int
    area: float
    density: float


ZONE_COLUMNS = {
    "id": "id",
    "name": "name",
    "population": "population",
    "area": "area",
    "density": "density",
}


def parse_zones(stream: TextIO, columns: Mapping[str, str] | None = None, require_complete: bool = False) -> list[ZoneInfo]:
    """Parse community-area attributes.

    ``density`` may be absent, in which case it is population / area. With
    ``require_complete`` the ids must be exactly 1..77.
    """
    columns = {**ZONE_COLUMNS, **(columns or {})}
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise SchemaError("zone file has no header row")
    header = {h.strip() for h in reader.fieldnames}
    for name, col in columns.items():
        if col not in header and name != "density":
            raise SchemaError(f"zone file is missing column {col!r} (for {name})")
    zones = {}
    for line, row in enumerate(reader, start=2):
        row = {k.strip(): v for k, v in row.items() if k is not None}
        try:
            zid = _parse_zone(row[columns["id"]])
            population = _parse_count(row.get(columns["population"]) or "", "population", line)
            area = _parse_number(row.get(columns["area"]) or "")
            dens_text = row.get(columns["density"], "") or ""
            density = _parse_number(dens_text) if dens_text.strip() else (population / area if area > 0 else 0.0)
        except ValueError as exc:
            raise DataError(f"zone file line {line}: {exc}") from None
        if not 1 <= zid <= N_ZONES:
            raise DataError(f"zone file line {line}: zone id {zid} outside 1..{N_ZONES}")
        if zid in zones:
            raise DataError(f"zone file line {line}: duplicate zone id {zid}")
        zones[zid] = ZoneInfo(zid, row[columns["name"]].strip(), population, area, density)
    if require_complete and set(zones) != set(range(1, N_ZONES + 1)):
        absent = sorted(set(range(1, N_ZONES + 1)) - set(zones))
        raise DataError(f"zone file is incomplete; missing ids {absent}")
    return [zones[k] for k in sorted(zones)]


def zones_to_csv(zones: Iterable[ZoneInfo], out: TextIO) -> None:
    from .series import format_float

    w = csv.writer(out, lineterminator="\n")
    w.writerow(["id", "name", "population", "area", "density"])
    for z in zones:
        w.writerow([z.id, z.name, z.population, format_float(z.area), format_float(z.density)])


def report_to_json(report: CleaningReport) -> str:
    return json.dumps(report.to_json_obj(), indent=2) + "\n"


def open_text(path) -> TextIO:
    return io.open(path, "r", encoding="utf-8-sig", newline="")
