import io
import random
from collections import Counter
from datetime import date, datetime, timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from demand_pulse.errors import DataError, DuplicateDate, MissingDates, NonMonotoneCumulative, SchemaError
from demand_pulse.ingest import (
    COMMUNITY_AREAS,
    RULES,
    CleaningReport,
    DailyAccumulator,
    RawTrip,
    RowError,
    TripRecord,
    TripSchema,
    aggregate_daily,
    clean_trips,
    daily_mean_distance,
    keyed_series_from_csv,
    keyed_series_to_csv,
    parse_epidemic,
    parse_timestamp,
    parse_trips,
    parse_vaccination,
    parse_zones,
)
from demand_pulse.series import AnalysisPeriod, period_mean

from tripdata import ADVERSARIAL, HEADER, row, to_csv


def parse(rows):
    return list(parse_trips(io.StringIO(to_csv(rows))))


def clean(rows):
    stream, report = clean_trips(parse_trips(io.StringIO(to_csv(rows))))
    kept = list(stream)
    return kept, report


def trip(day: date, pickup=1, dropoff=2, miles=2.0, hour=10):
    start = datetime(day.year, day.month, day.day, hour)
    return TripRecord(start, start + timedelta(minutes=10), 600.0, miles, pickup, dropoff)


class TestTimestamps:
    def test_portal_format(self):
        assert parse_timestamp("05/01/2020 01:15:00 PM") == datetime(2020, 5, 1, 13, 15)
        assert parse_timestamp("05/01/2020 12:00:00 AM") == datetime(2020, 5, 1, 0, 0)

    def test_iso(self):
        assert parse_timestamp("2020-05-01T13:15:00") == datetime(2020, 5, 1, 13, 15)

    def test_garbage(self):
        with pytest.raises(ValueError):
            parse_timestamp("yesterday")


class TestParseTrips:
    def test_one_valid_row(self):
        items = parse([row()])
        assert len(items) == 1
        raw = items[0]
        assert isinstance(raw, RawTrip)
        assert raw.start == datetime(2020, 5, 1, 10)
        assert raw.distance == 3.2 and raw.pickup == 8 and raw.dropoff == 32 and raw.fare == 14.25

    def test_empty_end_timestamp(self):
        (item,) = parse([row(end="")])
        assert isinstance(item, RowError)
        assert item.field == "end"
        assert item.partial.start == datetime(2020, 5, 1, 10)

    def test_malformed_number(self):
        (item,) = parse([row(miles="three")])
        assert isinstance(item, RowError) and item.field == "distance"

    def test_header_only(self):
        assert parse([]) == []

    def test_missing_column(self):
        text = "Trip Start Timestamp,Trip End Timestamp\n"
        with pytest.raises(SchemaError):
            parse_trips(io.StringIO(text))

    def test_custom_schema(self):
        text = "s,e,sec,mi,pu,do\n2020-05-01 10:00:00,2020-05-01 10:20:00,1200,4,1,2\n"
        schema = TripSchema("s", "e", "sec", "mi", "pu", "do", None)
        (raw,) = list(parse_trips(io.StringIO(text), schema))
        assert raw.duration == 1200 and raw.pickup == 1

    def test_line_numbers(self):
        items = parse([row(), row(end=""), row()])
        assert [i.line for i in items] == [2, 3, 4]

    def test_streaming(self):
        def lines():
            yield ",".join(HEADER) + "\n"
            while True:
                yield "t,05/01/2020 10:00:00 AM,05/01/2020 10:15:00 AM,900,3.2,8,32,1\n"

        class Endless(io.TextIOBase):
            def __init__(self):
                self._it = lines()

            def __iter__(self):
                return self._it

            def __next__(self):
                return next(self._it)

        it = parse_trips(Endless())
        assert [next(it).pickup for _ in range(3)] == [8, 8, 8]


class TestCleaning:
    def test_duration_45s(self):
        kept, report = clean([row(seconds="45")])
        assert kept == [] and report.rejected_per_rule["min_duration"] == 1

    def test_distance_03(self):
        kept, report = clean([row(miles="0.3")])
        assert kept == [] and report.rejected_per_rule["min_distance"] == 1

    def test_end_before_start(self):
        kept, report = clean([row(start="05/01/2020 10:00:00 AM", end="05/01/2020 09:00:00 AM")])
        assert report.rejected_per_rule["start_before_end"] == 1

    def test_valid_row(self):
        kept, report = clean([row()])
        assert len(kept) == 1 and report.rows_out == 1
        assert kept[0].pickup_zone == 8 and kept[0].duration == 900

    def test_missing_timestamp_is_rule_one(self):
        _, report = clean([row(end="")])
        assert report.rejected_per_rule["timestamps_present"] == 1
        assert report.parse_errors == 1

    def test_first_rule_wins(self):
        # breaks both the duration and the distance rule
        _, report = clean([row(seconds="10", miles="0.1")])
        assert report.rejected_per_rule["min_duration"] == 1
        assert report.rejected_per_rule["min_distance"] == 0

    def test_year_bounds_inclusive(self):
        kept, _ = clean([row(start="01/01/2018 12:00:00 AM", end="01/01/2018 12:05:00 AM", seconds="300")])
        assert len(kept) == 1
        _, report = clean([row(start="12/31/2021 11:59:00 PM", end="01/01/2022 12:05:00 AM", seconds="360")])
        assert report.rejected_per_rule["year_range"] == 1

    def test_boundaries_are_strict(self):
        _, report = clean([row(seconds="60"), row(miles="0.5")])
        assert report.rejected_per_rule["min_duration"] == 1
        assert report.rejected_per_rule["min_distance"] == 1

    def test_adversarial_tallies(self):
        kept, report = clean([r for _, r in ADVERSARIAL])
        expected = Counter(rule for rule, _ in ADVERSARIAL if rule)
        assert report.rejected_per_rule == {r: expected.get(r, 0) for r in RULES}
        assert report.rows_in == 10 and report.rows_out == 2 == len(kept)
        report.check()

    def test_report_json_round_trip(self):
        _, report = clean([r for _, r in ADVERSARIAL])
        assert CleaningReport.from_json_obj(report.to_json_obj()) == report

    @given(st.permutations(range(len(ADVERSARIAL))))
    def test_order_independent_tallies(self, order):
        rows = [ADVERSARIAL[i][1] for i in order]
        _, report = clean(rows)
        _, reference = clean([r for _, r in ADVERSARIAL])
        assert report == reference

    @given(st.lists(st.sampled_from(range(len(ADVERSARIAL))), max_size=30))
    def test_accounting_identity(self, picks):
        kept, report = clean([ADVERSARIAL[i][1] for i in picks])
        assert report.rows_in == len(picks)
        assert report.rows_in == report.rows_out + report.rejected
        assert len(kept) == report.rows_out

    def test_merge_matches_single_pass(self):
        rows = [r for _, r in ADVERSARIAL] * 3
        _, whole = clean(rows)
        _, a = clean(rows[:7])
        _, b = clean(rows[7:])
        assert a.merge(b) == whole


class TestAggregation:
    def test_three_trips_same_zone(self):
        d = date(2020, 5, 1)
        out = aggregate_daily([trip(d, pickup=5)] * 3, "pickup_zone")
        assert out[5].value_at(d) == 3

    def test_empty(self):
        assert aggregate_daily([], "city") == {}

    def test_zero_fill(self):
        d1 = date(2020, 5, 1)
        d3 = d1 + timedelta(2)
        out = aggregate_daily([trip(d1), trip(d1), trip(d3)], "city")
        assert list(out["city"].items()) == [(d1, 2.0), (d1 + timedelta(1), 0.0), (d3, 1.0)]
        assert out["city"].label == "taxi_trips"

    def test_zone_series_span_global_range(self):
        d1 = date(2020, 5, 1)
        out = aggregate_daily([trip(d1, pickup=1), trip(d1 + timedelta(4), pickup=2)], "pickup_zone")
        assert len(out[1]) == len(out[2]) == 5

    def test_od_pairs(self):
        d = date(2020, 5, 1)
        out = aggregate_daily([trip(d, 1, 2), trip(d, 1, 2), trip(d, 2, 1)], "od_pair")
        assert out[(1, 2)].value_at(d) == 2 and out[(2, 1)].value_at(d) == 1

    def test_dated_by_start(self):
        start = datetime(2020, 5, 1, 23, 50)
        t = TripRecord(start, start + timedelta(minutes=30), 1800.0, 5.0, 1, 2)
        out = aggregate_daily([t])
        assert out["city"].start == date(2020, 5, 1)

    def test_mean_distance(self):
        d = date(2020, 5, 1)
        out = daily_mean_distance([trip(d, miles=2.0), trip(d, miles=4.0)])
        assert out["city"].value_at(d) == 3.0

    def test_mean_distance_skips_empty_days(self):
        d1 = date(2020, 5, 1)
        d3 = d1 + timedelta(2)
        out = daily_mean_distance([trip(d1, miles=3.0), trip(d3, miles=5.0)])["city"]
        with pytest.raises(KeyError):
            out.value_at(d1 + timedelta(1))
        assert period_mean(out, AnalysisPeriod(d1, d3)) == 4.0

    @given(
        st.lists(
            st.tuples(st.integers(0, 9), st.integers(1, 77), st.integers(1, 77), st.integers(51, 5000)),
            min_size=1,
            max_size=60,
        ),
        st.randoms(use_true_random=False),
        st.integers(1, 5),
    )
    def test_conservation_and_sharding(self, draws, rng, shards):
        trips = [trip(date(2020, 5, 1) + timedelta(d), pu, do, mi / 100) for d, pu, do, mi in draws]
        whole = DailyAccumulator().consume(trips)
        city = whole.counts("city")["city"]
        zones = whole.counts("pickup_zone")
        for day, total in city.items():
            assert sum(z.value_at(day) for z in zones.values()) == total
        for s in zones.values():
            assert all(v >= 0 and float(v).is_integer() for v in s.values)

        shuffled = list(trips)
        rng.shuffle(shuffled)
        parts = [DailyAccumulator().consume(shuffled[k::shards]) for k in range(shards)]
        merged = parts[0]
        for p in parts[1:]:
            merged = merged.merge(p)
        assert merged.counts("pickup_zone") == zones
        merged_mean = merged.mean_distance("pickup_zone")
        whole_mean = whole.mean_distance("pickup_zone")
        assert merged_mean.keys() == whole_mean.keys()
        for k in whole_mean:
            assert merged_mean[k] == whole_mean[k]

    def test_keyed_csv_round_trip(self):
        d = date(2020, 5, 1)
        out = aggregate_daily([trip(d, 3), trip(d + timedelta(1), 7)], "pickup_zone")
        buf = io.StringIO()
        keyed_series_to_csv(out, buf)
        assert buf.getvalue().splitlines()[0] == "date,key,value"
        back = keyed_series_from_csv(io.StringIO(buf.getvalue()), unit="trips")
        assert back.keys() == out.keys()
        for k in out:
            assert back[k] == out[k]


EPI_HEADER = "date,new_cases,new_hospitalizations,new_deaths,cum_cases,cum_hospitalizations,cum_deaths\n"


class TestDailyFiles:
    def test_epidemic(self):
        text = EPI_HEADER + "2020-03-01,1,0,0,1,0,0\n2020-03-02,2,1,0,3,1,0\n"
        recs = parse_epidemic(io.StringIO(text))
        assert [r.date for r in recs] == [date(2020, 3, 1), date(2020, 3, 2)]
        assert recs[1].cum_cases == 3

    def test_sorted_output(self):
        text = EPI_HEADER + "2020-03-02,2,1,0,3,1,0\n2020-03-01,1,0,0,1,0,0\n"
        recs = parse_epidemic(io.StringIO(text))
        assert [r.date for r in recs] == [date(2020, 3, 1), date(2020, 3, 2)]

    def test_duplicate_date(self):
        text = EPI_HEADER + "2020-03-01,1,0,0,1,0,0\n2020-03-01,1,0,0,2,0,0\n"
        with pytest.raises(DuplicateDate):
            parse_epidemic(io.StringIO(text))

    def test_cumulative_decrease(self):
        text = EPI_HEADER + "2020-03-01,100,0,0,100,0,0\n2020-03-02,0,0,0,90,0,0\n"
        with pytest.raises(NonMonotoneCumulative):
            parse_epidemic(io.StringIO(text))

    def test_gap(self):
        text = EPI_HEADER + "2020-03-01,1,0,0,1,0,0\n2020-03-03,1,0,0,2,0,0\n"
        with pytest.raises(MissingDates):
            parse_epidemic(io.StringIO(text))

    def test_negative_count(self):
        text = EPI_HEADER + "2020-03-01,-1,0,0,1,0,0\n"
        with pytest.raises(DataError):
            parse_epidemic(io.StringIO(text))

    def test_vaccination_derives_cumulative(self):
        text = "date,new_first,new_second,new_total\n2020-12-15,10,0,10\n2020-12-16,5,2,7\n"
        recs = parse_vaccination(io.StringIO(text))
        assert [r.cum_first for r in recs] == [10, 15]
        assert [r.cum_total for r in recs] == [10, 17]


def zone_file(ids):
    lines = ["id,name,population,area,density"]
    for i in ids:
        lines.append(f"{i},{COMMUNITY_AREAS[i]},{1000 * i},{0.5 + i / 10},{1000 * i / (0.5 + i / 10)}")
    return io.StringIO("\n".join(lines) + "\n")


class TestZones:
    def test_full_table(self):
        zones = parse_zones(zone_file(range(1, 78)), require_complete=True)
        assert [z.id for z in zones] == list(range(1, 78))
        assert zones[0].name == "Rogers Park" and zones[76].name == "Edgewater"
        assert zones[31].name == "Loop"

    def test_incomplete(self):
        with pytest.raises(DataError):
            parse_zones(zone_file(range(1, 77)), require_complete=True)
        assert len(parse_zones(zone_file([8, 32]))) == 2

    def test_out_of_range_and_duplicate(self):
        text = "id,name,population,area\n78,X,1,1\n"
        with pytest.raises(DataError):
            parse_zones(io.StringIO(text))
        text = "id,name,population,area\n1,X,1,1\n1,Y,1,1\n"
        with pytest.raises(DataError):
            parse_zones(io.StringIO(text))

    def test_density_derived(self):
        (z,) = parse_zones(io.StringIO("id,name,population,area\n5,North Center,3000,2\n"))
        assert z.density == 1500.0

    def test_shuffled_rows(self):
        ids = list(range(1, 78))
        random.Random(3).shuffle(ids)
        assert [z.id for z in parse_zones(zone_file(ids))] == list(range(1, 78))
