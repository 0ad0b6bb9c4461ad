"""Synthetic study dataset with known answers.

Six weeks of trips over five community areas, plus matching epidemic,
vaccination and zone files. The construction pins down several results:

* cumulative first doses are the city trip series scaled by 10 and moved two
  days earlier, so first doses lead taxi volume by +2 days;
* cumulative second doses are the trip series scaled by 5 and delayed five
  days, so taxi volume leads second doses by 5 days (offset -5);
* every trip in a zone and period has the same length, so per-zone mean
  distances and their change class are known exactly;
* zone period totals are fixed up front (see :attr:`FixtureTruth.totals`).

A handful of dirty rows, one or more per cleaning rule, are mixed in.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

from .ingest import COMMUNITY_AREAS

START = date(2021, 1, 1)
N_DAYS = 42
BEFORE = (date(2021, 1, 1), date(2021, 1, 14))
AFTER = (date(2021, 1, 15), date(2021, 2, 11))
SEED = 20210101
DIRTY_EVERY = 4

FIRST_DOSE_LEAD = 2
SECOND_DOSE_LAG = 5

ZONES = {
    # id: (population, area sq mi)
    8: (80_000, 2.7),
    32: (40_000, 1.6),
    56: (35_000, 5.3),
    64: (25_000, 2.6),
    76: (12_000, 13.3),
}

BEFORE_SHARE = {8: 0.34, 32: 0.26, 56: 0.10, 64: 0.12, 76: 0.18}
AFTER_SHARE = {8: 0.30, 32: 0.27, 56: 0.09, 64: 0.09, 76: 0.25}

# per-trip miles in (before, after)
DISTANCE = {
    8: (6.0, 3.5),    # decreased by 2.5
    32: (2.0, 2.5),   # not significant
    56: (4.0, 7.0),   # increased by 3.0
    64: (5.0, 7.0),   # exactly the threshold -> not significant
    76: (12.0, 15.5), # increased by 3.5
}

# (description, expected rule) for every dirty row written
DIRTY_ROWS = (
    ("missing end timestamp", "timestamps_present"),
    ("malformed start timestamp", "timestamps_present"),
    ("year 2017", "year_range"),
    ("year 2022", "year_range"),
    ("start after end", "start_before_end"),
    ("start equals end", "start_before_end"),
    ("45 second trip", "min_duration"),
    ("0.3 mile trip", "min_distance"),
    ("malformed distance", "min_distance"),
    ("missing dropoff zone", "zones_valid"),
    ("pickup zone 0", "zones_valid"),
)

TRIP_HEADER = [
    "Trip ID",
    "Trip Start Timestamp",
    "Trip End Timestamp",
    "Trip Seconds",
    "Trip Miles",
    "Pickup Community Area",
    "Dropoff Community Area",
    "Trip Total",
]


@dataclass
class FixtureTruth:
    """Values the fixture was built to produce."""

    city_daily: list[int]
    totals: dict[str, dict[int, int]]
    distance: dict[int, tuple[float, float]] = field(default_factory=lambda: dict(DISTANCE))
    first_dose_offset: int = FIRST_DOSE_LEAD
    second_dose_offset: int = -SECOND_DOSE_LAG
    dirty_rules: dict[str, int] = field(default_factory=dict)


def _base_signal(rng: random.Random) -> list[int]:
    """Non-decreasing, irregular ramp covering days -SECOND_DOSE_LAG .. N_DAYS + FIRST_DOSE_LEAD."""
    n = N_DAYS + FIRST_DOSE_LEAD + SECOND_DOSE_LAG
    level, out = 20, []
    for _ in range(n):
        out.append(level)
        level += rng.choice((0, 1, 1, 2, 3, 5))
    return out


def _apportion(total: int, shares: dict[int, float]) -> dict[int, int]:
    raw = {z: total * w for z, w in shares.items()}
    out = {z: int(v) for z, v in raw.items()}
    rest = total - sum(out.values())
    for z in sorted(raw, key=lambda z: (out[z] - raw[z], z))[:rest]:
        out[z] += 1
    return out


def _interleave(totals: dict[int, int]) -> list[int]:
    slots = []
    for z, k in totals.items():
        slots.extend(((i + 0.5) / k, z) for i in range(k))
    return [z for _, z in sorted(slots)]


def _fmt_ts(ts: datetime) -> str:
    return ts.strftime("%m/%d/%Y %I:%M:%S %p")


def build(seed: int = SEED) -> tuple[dict[str, str], FixtureTruth]:
    """Return ({file name: text}, truth)."""
    rng = random.Random(seed)
    signal = _base_signal(rng)

    def s(t: int) -> int:
        return signal[t + SECOND_DOSE_LAG]

    city = [s(t) for t in range(N_DAYS)]
    n_before = (BEFORE[1] - BEFORE[0]).days + 1
    totals = {
        "before": _apportion(sum(city[:n_before]), BEFORE_SHARE),
        "after": _apportion(sum(city[n_before:]), AFTER_SHARE),
    }
    order = {"before": _interleave(totals["before"]), "after": _interleave(totals["after"])}
    zone_ids = sorted(ZONES)

    trips = io.StringIO()
    w = csv.writer(trips, lineterminator="\n")
    w.writerow(TRIP_HEADER)
    trip_id = 0
    cursor = {"before": 0, "after": 0}
    for t in range(N_DAYS):
        day = START + timedelta(days=t)
        period = "before" if t < n_before else "after"
        for k in range(city[t]):
            zone = order[period][cursor[period]]
            cursor[period] += 1
            dropoff = zone_ids[(zone_ids.index(zone) + 1 + k) % len(zone_ids)]
            start = datetime(day.year, day.month, day.day, 6, 0) + timedelta(minutes=15 * (k % 64))
            end = start + timedelta(minutes=15 * (1 + k % 3))
            seconds = int((end - start).total_seconds()) + (k * 7) % 120 - 60
            miles = DISTANCE[zone][0 if period == "before" else 1]
            start_text = start.isoformat(sep="T") if k == 0 and t % 10 == 3 else _fmt_ts(start)
            trip_id += 1
            w.writerow([f"T{trip_id:06d}", start_text, _fmt_ts(end), seconds, f"{miles:.2f}",
                        zone, dropoff, f"{10 + 2.25 * miles:.2f}"])
            if k == 5 and t % DIRTY_EVERY == 0:
                _write_dirty(w, day, t // DIRTY_EVERY)
    dirty_rules: dict[str, int] = {}
    n_dirty_blocks = len(range(0, N_DAYS, DIRTY_EVERY))
    for i in range(n_dirty_blocks):
        _, rule = DIRTY_ROWS[i % len(DIRTY_ROWS)]
        dirty_rules[rule] = dirty_rules.get(rule, 0) + 1

    epidemic = io.StringIO()
    w = csv.writer(epidemic, lineterminator="\n")
    w.writerow(["date", "new_cases", "new_hospitalizations", "new_deaths",
                "cum_cases", "cum_hospitalizations", "cum_deaths"])
    cum = [250_000, 25_000, 4_800]
    for t in range(N_DAYS):
        day = START + timedelta(days=t)
        cases = max(0, int(900 - 14 * t + rng.randint(-60, 60)))
        hosp = max(0, cases // 11 + rng.randint(-5, 5))
        deaths = max(0, cases // 60 + rng.randint(-3, 3))
        cum = [cum[0] + cases, cum[1] + hosp, cum[2] + deaths]
        w.writerow([day.isoformat(), cases, hosp, deaths, *cum])

    vaccination = io.StringIO()
    w = csv.writer(vaccination, lineterminator="\n")
    w.writerow(["date", "new_first", "new_second", "new_total", "cum_first", "cum_second", "cum_total"])
    for t in range(N_DAYS):
        day = START + timedelta(days=t)
        cf, cf_prev = 10 * s(t + FIRST_DOSE_LEAD), 10 * s(t + FIRST_DOSE_LEAD - 1)
        cs = 5 * s(t - SECOND_DOSE_LAG)
        cs_prev = 5 * s(t - SECOND_DOSE_LAG - 1) if t > 0 else 0
        nf, ns = cf - cf_prev, cs - cs_prev
        w.writerow([day.strftime("%m/%d/%Y"), nf, ns, nf + ns, cf, cs, cf + cs])

    zones = io.StringIO()
    w = csv.writer(zones, lineterminator="\n")
    w.writerow(["id", "name", "population", "area", "density"])
    for zid, (pop, area) in sorted(ZONES.items()):
        w.writerow([zid, COMMUNITY_AREAS[zid], pop, area, round(pop / area, 1)])

    files = {
        "trips.csv": trips.getvalue(),
        "epidemic.csv": epidemic.getvalue(),
        "vaccination.csv": vaccination.getvalue(),
        "zones.csv": zones.getvalue(),
        "fixture.ini": CONFIG_TEMPLATE,
    }
    return files, FixtureTruth(city, totals, dirty_rules=dirty_rules)


def _write_dirty(w, day: date, i: int) -> None:
    desc, _ = DIRTY_ROWS[i % len(DIRTY_ROWS)]
    start = datetime(day.year, day.month, day.day, 23, 0)
    end = start + timedelta(minutes=15)
    row = {
        "id": f"D{i:03d}", "start": _fmt_ts(start), "end": _fmt_ts(end), "sec": "900",
        "miles": "3.00", "pickup": "8", "dropoff": "32", "fare": "16.75",
    }
    if desc == "missing end timestamp":
        row["end"] = ""
    elif desc == "malformed start timestamp":
        row["start"] = "13/45/2021 99:00:00 XM"
    elif desc == "year 2017":
        row["start"] = _fmt_ts(start.replace(year=2017))
    elif desc == "year 2022":
        row["end"] = _fmt_ts(end.replace(year=2022))
    elif desc == "start after end":
        row["start"], row["end"] = row["end"], row["start"]
    elif desc == "start equals end":
        row["end"] = row["start"]
    elif desc == "45 second trip":
        row["sec"] = "45"
    elif desc == "0.3 mile trip":
        row["miles"] = "0.30"
    elif desc == "malformed distance":
        row["miles"] = "3..0"
    elif desc == "missing dropoff zone":
        row["dropoff"] = ""
    elif desc == "pickup zone 0":
        row["pickup"] = "0"
    w.writerow(list(row.values()))


CONFIG_TEMPLATE = """\
# Synthetic fixture configuration. Relative paths resolve against this file.

[inputs]
trips = trips.csv
epidemic = epidemic.csv
vaccination = vaccination.csv
zones = zones.csv

[periods]
before = 2021-01-01..2021-01-14
after = 2021-01-15..2021-02-11

[analysis]
smoothing = true
dtw_normalization = zscore
dtw_cost = absolute
tlcc_max_offset = 7
distance_threshold = 2.0
fit_intercept = true

[output]
dir = out
"""


def write(directory, seed: int = SEED) -> FixtureTruth:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files, truth = build(seed)
    for name, text in files.items():
        (directory / name).write_text(text, encoding="utf-8", newline="")
    return truth


def bundled_dir() -> Path:
    return Path(__file__).parent / "fixture_data"
