import json
import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from demand_pulse.errors import (
    EmptyInput,
    EmptyWindow,
    NonMonotoneCumulative,
    NotContiguous,
    TooShort,
    ZeroRange,
    ZeroVariance,
)
from demand_pulse.series import (
    AFTER_VACCINATION,
    BEFORE_VACCINATION,
    AnalysisPeriod,
    DateIndexedSeries,
    align_common_dates,
    cumulative,
    daily_from_cumulative,
    describe,
    fill_missing_dates,
    minmax,
    period_mean,
    restrict,
    rolling_mean_7,
    zscore,
)

from oracles import trailing_mean_loop

D1 = date(2021, 3, 1)


def series(values, start=D1, label="s"):
    return DateIndexedSeries.from_values(label, start, values)


def test_rejects_unsorted_and_nonfinite():
    with pytest.raises(ValueError):
        DateIndexedSeries.from_values("x", D1, [1.0, float("nan")])
    with pytest.raises(ValueError):
        DateIndexedSeries("x", np.array(["2021-01-02", "2021-01-01"], dtype="datetime64[D]"), [1, 2])
    with pytest.raises(ValueError):
        DateIndexedSeries.from_pairs("x", [(D1, 1), (D1, 2)])


def test_values_are_read_only():
    s = series([1, 2, 3])
    with pytest.raises(ValueError):
        s.values[0] = 10


class TestFillMissingDates:
    def test_gap_insertion(self):
        s = DateIndexedSeries.from_pairs("s", [(D1, 3), (D1 + timedelta(2), 5)])
        out = fill_missing_dates(s, 0)
        assert list(out.items()) == [(D1, 3.0), (D1 + timedelta(1), 0.0), (D1 + timedelta(2), 5.0)]

    def test_contiguous_unchanged(self):
        s = series([1, 2, 3, 4])
        assert fill_missing_dates(s, 99) == s

    def test_enumerated_days(self):
        d5 = D1 + timedelta(4)
        out = fill_missing_dates(DateIndexedSeries.from_pairs("s", [(D1, 1), (d5, 1)]), 7)
        expected_days = [D1 + timedelta(k) for k in range((d5 - D1).days + 1)]
        assert [d for d, _ in out.items()] == expected_days
        assert [v for _, v in out.items()] == [1, 7, 7, 7, 1]

    def test_empty(self):
        with pytest.raises(EmptyInput):
            fill_missing_dates(DateIndexedSeries.from_values("e", D1, []))

    @given(st.dictionaries(st.integers(0, 60), st.floats(-1e6, 1e6), min_size=1), st.floats(-10, 10))
    def test_never_alters_existing(self, points, fill):
        s = DateIndexedSeries.from_pairs("s", [(D1 + timedelta(k), v) for k, v in points.items()])
        out = fill_missing_dates(s, fill)
        assert out.is_contiguous()
        for d, v in s.items():
            assert out.value_at(d) == v


class TestRollingMean:
    def test_constant(self):
        out = rolling_mean_7(series([5.0] * 10))
        assert list(out.values) == [5.0] * 10

    def test_one_to_fourteen(self):
        out = rolling_mean_7(series(range(1, 15)))
        assert out.values[6] == 4.0
        assert out.values[13] == 11.0

    def test_partial_window(self):
        out = rolling_mean_7(series([1, 2, 3]))
        assert out.values[2] == 2.0
        assert list(out.values) == [1.0, 1.5, 2.0]

    def test_label_and_dates(self):
        s = series(range(10), label="taxi")
        out = rolling_mean_7(s)
        assert out.label == "taxi_7d"
        assert np.array_equal(out.dates, s.dates)

    def test_needs_contiguous(self):
        s = DateIndexedSeries.from_pairs("s", [(D1, 1), (D1 + timedelta(3), 2)])
        with pytest.raises(NotContiguous):
            rolling_mean_7(s)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
    def test_matches_loop(self, values):
        out = rolling_mean_7(series(values))
        np.testing.assert_allclose(out.values, trailing_mean_loop(values), rtol=0, atol=1e-9)


class TestRestrict:
    def test_identity(self):
        s = series(range(10))
        assert restrict(s, AnalysisPeriod(s.start, s.end)) == s

    def test_after_period_has_167_days(self):
        s = DateIndexedSeries.from_values("s", date(2020, 12, 1), np.zeros((date(2021, 6, 30) - date(2020, 12, 1)).days + 1))
        assert len(restrict(s, AFTER_VACCINATION)) == 167

    @pytest.mark.xfail(
        strict=True,
        reason="2020-03-09..2020-12-15 spans 282 calendar days when both ends are inclusive; 281 cannot hold",
    )
    def test_before_period_has_281_days(self):
        s = DateIndexedSeries.from_values("s", date(2020, 1, 1), np.zeros((date(2021, 1, 1) - date(2020, 1, 1)).days + 1))
        assert len(restrict(s, BEFORE_VACCINATION)) == 281

    def test_before_period_inclusive_count(self):
        s = DateIndexedSeries.from_values("s", date(2020, 1, 1), np.zeros((date(2021, 1, 1) - date(2020, 1, 1)).days + 1))
        assert len(restrict(s, BEFORE_VACCINATION)) == BEFORE_VACCINATION.days == 282

    def test_no_overlap(self):
        with pytest.raises(EmptyWindow):
            restrict(series(range(5)), AnalysisPeriod(date(2030, 1, 1), date(2030, 2, 1)))

    def test_idempotent(self):
        s = series(range(100))
        p = AnalysisPeriod(D1 + timedelta(10), D1 + timedelta(40))
        assert restrict(restrict(s, p), p) == restrict(s, p)

    def test_bad_period(self):
        with pytest.raises(ValueError):
            AnalysisPeriod(date(2021, 2, 1), date(2021, 1, 1))


class TestZscore:
    def test_three_values(self):
        out = zscore(series([0, 1, 2]))
        expected = 1 / math.sqrt(2 / 3)
        np.testing.assert_allclose(out.values, [-expected, 0, expected], rtol=0, atol=1e-15)

    def test_idempotent(self):
        once = zscore(series([3, 1, 4, 1, 5, 9, 2, 6]))
        twice = zscore(once)
        np.testing.assert_allclose(twice.values, once.values, rtol=0, atol=1e-12)

    def test_constant(self):
        with pytest.raises(ZeroVariance):
            zscore(series([5, 5, 5]))

    def test_too_short(self):
        with pytest.raises(TooShort):
            zscore(series([5]))

    @given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=200).filter(lambda v: max(v) - min(v) > 1e-3))
    def test_moments(self, values):
        z = zscore(series(values)).values
        assert abs(z.mean()) < 1e-12
        assert abs(np.sqrt(np.mean((z - z.mean()) ** 2)) - 1) < 1e-12


class TestMinmax:
    def test_values(self):
        assert list(minmax(series([2, 4, 6])).values) == [0, 0.5, 1]
        assert list(minmax(series([0, 1])).values) == [0, 1]

    def test_constant(self):
        with pytest.raises(ZeroRange):
            minmax(series([10, 10]))


class TestCumulative:
    def test_prefix_sum(self):
        assert list(cumulative(series([1, 2, 3])).values) == [1, 3, 6]

    def test_inverse(self):
        assert list(daily_from_cumulative(series([1, 3, 6])).values) == [1, 2, 3]

    def test_decreasing(self):
        with pytest.raises(NonMonotoneCumulative):
            daily_from_cumulative(series([5, 4]))

    @given(st.lists(st.integers(0, 10**6), min_size=1, max_size=50))
    def test_round_trip(self, increments):
        cum = np.cumsum(increments)
        s = series(cum)
        assert cumulative(daily_from_cumulative(s)) == s


class TestAlign:
    def test_identical(self):
        a, b = series(range(5), label="a"), series(range(5), label="b")
        a2, b2 = align_common_dates(a, b)
        assert a2 == a and b2 == b

    def test_overlap(self):
        a = DateIndexedSeries.from_values("a", date(2021, 1, 1), np.arange(181))  # Jan..Jun
        b = DateIndexedSeries.from_values("b", date(2021, 3, 1), np.arange(214))  # Mar..Sep
        a2, b2 = align_common_dates(a, b)
        assert a2.start == b2.start == date(2021, 3, 1)
        assert a2.end == b2.end == date(2021, 6, 30)
        assert a2.value_at(date(2021, 3, 1)) == a.value_at(date(2021, 3, 1))

    def test_disjoint(self):
        a = DateIndexedSeries.from_values("a", date(2021, 1, 1), np.arange(59))
        b = DateIndexedSeries.from_values("b", date(2021, 3, 1), np.arange(61))
        with pytest.raises(EmptyWindow):
            align_common_dates(a, b)


def test_period_mean_skips_missing():
    s = DateIndexedSeries.from_pairs("d", [(D1, 3.0), (D1 + timedelta(2), 5.0)])
    assert period_mean(s, AnalysisPeriod(D1, D1 + timedelta(2))) == 4.0
    assert period_mean(s, AnalysisPeriod(date(2030, 1, 1), date(2030, 1, 2))) is None


def test_describe():
    stats = describe(series([1, 2, 3, 4, 100]))
    assert stats["mean"] == 22.0
    assert stats["median"] == 3.0
    assert stats["min"] == 1.0 and stats["max"] == 100.0
    assert stats["std"] == pytest.approx(np.std([1, 2, 3, 4, 100], ddof=1))


def test_csv_and_json_round_trip():
    s = DateIndexedSeries.from_values("taxi", D1, [0.1, 1 / 3, 2e-17, 5], unit="trips")
    text = s.to_csv()
    assert text.splitlines()[0] == "date,value"
    assert text.splitlines()[1].startswith("2021-03-01,")
    assert DateIndexedSeries.from_csv(text, "taxi", "trips") == s
    obj = json.loads(s.to_json())
    assert obj == {"label": "taxi", "unit": "trips", "start_date": "2021-03-01", "values": [0.1, 1 / 3, 2e-17, 5.0]}
    assert DateIndexedSeries.from_json_obj(obj) == s
