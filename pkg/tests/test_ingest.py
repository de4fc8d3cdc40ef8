import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ellcov.ingest import (
    IngestError,
    ReturnPanel,
    load_prices,
    parse_quarter,
    quarter_range,
    split_periods,
    synthetic_price_panel,
    to_quarterly_log_returns,
)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def quarter_end_dates(n, year=2010):
    ends = ["03-31", "06-30", "09-30", "12-31"]
    return [f"{year + k // 4}-{ends[k % 4]}" for k in range(n)]


def full_panel(tmp_path, first="2010Q1", last="2022Q4", p=3):
    """Return panel with one row per quarter from ``first`` to ``last``."""
    qs = quarter_range(parse_quarter(first), parse_quarter(last))
    rng = np.random.default_rng(0)
    return ReturnPanel(tuple(f"T{j}" for j in range(p)), tuple(qs), rng.normal(size=(len(qs), p)))


class TestQuarters:
    def test_parse(self):
        assert parse_quarter("2017Q2") == (2017, 2)
        assert parse_quarter("2017-q4") == (2017, 4)

    @pytest.mark.parametrize("bad", ["2017Q5", "17Q1", "Q2 2017", ""])
    def test_parse_bad(self, bad):
        with pytest.raises(IngestError):
            parse_quarter(bad)

    def test_range_wraps_year(self):
        assert quarter_range((2016, 3), (2017, 2)) == [(2016, 3), (2016, 4), (2017, 1), (2017, 2)]


class TestLoad:
    def test_two_by_nine(self, tmp_path):
        dates = quarter_end_dates(9)
        path = write_csv(tmp_path / "p.csv", ["date", "A", "B"],
                         [[d, 10 + k, 20 + k] for k, d in enumerate(dates)])
        panel = load_prices(path)
        assert panel.prices.shape == (9, 2)
        assert panel.tickers == ["A", "B"]
        assert panel.diagnostics.coverage == {"A": 9, "B": 9}

    def test_missing_quarter_excluded(self, tmp_path):
        dates = quarter_end_dates(9)
        rows = [[d, 10 + k, "" if k == 4 else 20 + k] for k, d in enumerate(dates)]
        panel = load_prices(write_csv(tmp_path / "p.csv", ["date", "A", "B"], rows))
        ret = to_quarterly_log_returns(panel)
        assert ret.tickers == ("A",)
        assert ret.returns.shape == (8, 1)
        assert panel.diagnostics.excluded_tickers == ["B"]
        assert panel.diagnostics.coverage["B"] == 8

    def test_duplicate_last_wins(self, tmp_path):
        rows = [["2010-03-31", 1.0], ["2010-06-30", 2.0], ["2010-06-30", 3.0]]
        panel = load_prices(write_csv(tmp_path / "p.csv", ["date", "A"], rows))
        assert panel.diagnostics.duplicate_dates == 1
        np.testing.assert_array_equal(panel.prices[:, 0], [1.0, 3.0])

    def test_bad_cells_recorded(self, tmp_path):
        rows = [["2010-03-31", "x"], ["not a date", 2.0], ["2010-06-30", 2.0]]
        panel = load_prices(write_csv(tmp_path / "p.csv", ["date", "A"], rows))
        assert panel.diagnostics.dropped_rows == 1
        assert len(panel.diagnostics.bad_cells) == 2
        assert math.isnan(panel.prices[0, 0])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(IngestError, match="empty"):
            load_prices(path)

    def test_missing_date_column(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", ["day", "A"], [["2010-03-31", 1]])
        with pytest.raises(IngestError):
            load_prices(path)


class TestReturns:
    def test_log_ratio(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", ["date", "A"], [["2010-03-31", 100], ["2010-06-30", 110]])
        ret = to_quarterly_log_returns(load_prices(path))
        assert ret.returns[0, 0] == pytest.approx(0.0953101798, abs=1e-10)
        assert ret.labels == ["2010Q2"]

    def test_constant_prices(self, tmp_path):
        dates = quarter_end_dates(6)
        path = write_csv(tmp_path / "p.csv", ["date", "A", "B"], [[d, 50, 7.5] for d in dates])
        ret = to_quarterly_log_returns(load_prices(path))
        np.testing.assert_array_equal(ret.returns, 0.0)

    def test_last_observation_in_quarter(self, tmp_path):
        rows = [["2010-01-05", 1.0], ["2010-03-15", 100.0], ["2010-05-01", 5.0], ["2010-06-28", 200.0]]
        ret = to_quarterly_log_returns(load_prices(write_csv(tmp_path / "p.csv", ["date", "A"], rows)))
        assert ret.returns[0, 0] == pytest.approx(math.log(2.0))

    def test_nonpositive_price(self, tmp_path):
        rows = [["2010-03-31", 1.0, 1.0], ["2010-06-30", 2.0, 0.0]]
        with pytest.raises(IngestError, match="B.*2010-06-30"):
            to_quarterly_log_returns(load_prices(write_csv(tmp_path / "p.csv", ["date", "A", "B"], rows)))

    def test_wide_panel(self, tmp_path):
        p = 434
        dates = quarter_end_dates(56, year=2009)[3:]  # 2009Q4 .. 2022Q4
        rng = np.random.default_rng(1)
        prices = np.exp(np.cumsum(rng.normal(0, 0.1, size=(len(dates), p)), axis=0))
        path = write_csv(tmp_path / "w.csv", ["date", *[f"X{j}" for j in range(p)]],
                         [[d, *row] for d, row in zip(dates, prices)])
        ret = to_quarterly_log_returns(load_prices(path))
        assert ret.returns.shape == (52, 434)
        assert ret.labels[0] == "2010Q1" and ret.labels[-1] == "2022Q4"

    @given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_scale_invariance(self, tmp_path_factory, c, seed):
        tmp = tmp_path_factory.mktemp("scale")
        rng = np.random.default_rng(seed)
        dates = quarter_end_dates(8)
        px = rng.uniform(1, 100, size=(8, 2))
        a = write_csv(tmp / "a.csv", ["date", "A", "B"], [[d, *r] for d, r in zip(dates, px)])
        b = write_csv(tmp / "b.csv", ["date", "A", "B"],
                      [[d, repr(float(r[0] * c)), r[1]] for d, r in zip(dates, px)])
        ra = to_quarterly_log_returns(load_prices(a)).returns
        rb = to_quarterly_log_returns(load_prices(b)).returns
        np.testing.assert_allclose(ra, rb, rtol=0, atol=1e-12)

    def test_panel_csv_round_trip(self, tmp_path):
        panel = full_panel(tmp_path)
        panel.to_csv(tmp_path / "r.csv")
        back = ReturnPanel.from_csv(tmp_path / "r.csv")
        assert back.tickers == panel.tickers and back.quarters == panel.quarters
        np.testing.assert_array_equal(back.returns, panel.returns)

    def test_panel_invariants(self):
        with pytest.raises(IngestError):
            ReturnPanel(("A",), ((2010, 2), (2010, 1)), np.zeros((2, 1)))
        with pytest.raises(IngestError):
            ReturnPanel(("A",), ((2010, 1),), np.array([[math.nan]]))


class TestSplit:
    def test_case_one(self, tmp_path):
        s1, s2 = split_periods(full_panel(tmp_path), "2017Q2")
        assert (s1.shape[0], s2.shape[0]) == (30, 22)

    def test_case_two(self, tmp_path):
        s1, s2 = split_periods(full_panel(tmp_path), "2016Q1", start="2013Q1", end="2022Q4")
        assert (s1.shape[0], s2.shape[0]) == (13, 27)

    def test_round_trip(self, tmp_path):
        panel = full_panel(tmp_path)
        s1, s2 = split_periods(panel, "2014Q3")
        np.testing.assert_array_equal(np.vstack([s1, s2]), panel.returns)

    @pytest.mark.parametrize("boundary", ["2022Q4", "2009Q4", "2023Q1"])
    def test_boundary_outside(self, tmp_path, boundary):
        with pytest.raises(IngestError):
            split_periods(full_panel(tmp_path), boundary)

    def test_too_few_rows(self, tmp_path):
        with pytest.raises(IngestError, match="need at least 4"):
            split_periods(full_panel(tmp_path), "2022Q2")


class TestSynthetic:
    def test_break_panel_shape(self, tmp_path):
        path = synthetic_price_panel(tmp_path / "s.csv", p=10, seed=3)
        panel = load_prices(path)
        ret = to_quarterly_log_returns(panel)
        assert ret.returns.shape == (52, 10)
        assert "GAP" in panel.diagnostics.excluded_tickers
        s1, s2 = split_periods(ret, "2017Q2")
        assert s1.shape == (30, 10) and s2.shape == (22, 10)

    def test_deterministic(self, tmp_path):
        a = synthetic_price_panel(tmp_path / "a.csv", p=5, seed=11).read_bytes()
        b = synthetic_price_panel(tmp_path / "b.csv", p=5, seed=11).read_bytes()
        assert a == b
