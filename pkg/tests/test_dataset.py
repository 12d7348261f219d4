import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tripeval.dataset import (
    Column,
    ColumnKind,
    DataTable,
    SplitSpec,
    TableSchema,
    decode,
    encode,
    fit_encoder,
    load_csv,
    parse_datetime,
    preprocess_trips,
    split,
)
from tripeval.errors import DataError

from .conftest import table

ZONE_FARE = TableSchema((Column("zone", ColumnKind.CATEGORICAL), Column("fare", ColumnKind.FLOAT)))


def zeller_weekday(year, month, day):
    """Monday=0 via Zeller's congruence (independent of the datetime module)."""
    if month < 3:
        month += 12
        year -= 1
    k, j = year % 100, year // 100
    h = (day + 13 * (month + 1) // 5 + k + k // 4 + j // 4 + 5 * j) % 7  # 0=Saturday
    return (h + 5) % 7


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_basic(self, tmp_path):
        t = load_csv(write(tmp_path, "zone,fare\nA,1.5\nB,2\n\"C,D\",3\n"), ZONE_FARE)
        assert t.n_rows == 3 and len(t.schema.columns) == 2
        assert list(t.column("zone")) == ["A", "B", "C,D"]
        np.testing.assert_array_equal(t.column("fare"), [1.5, 2.0, 3.0])

    def test_header_order_insensitive(self, tmp_path):
        t = load_csv(write(tmp_path, "fare,zone\n1,A\n"), ZONE_FARE)
        assert t.schema.names == ["zone", "fare"]
        assert t.column("zone")[0] == "A"

    def test_unknown_column(self, tmp_path):
        with pytest.raises(DataError, match="unknown column"):
            load_csv(write(tmp_path, "zone,fare,tip\nA,1,2\n"), ZONE_FARE)

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataError, match="header mismatch"):
            load_csv(write(tmp_path, "zone\nA\n"), ZONE_FARE)

    def test_bad_numeric_cell_is_missing(self, tmp_path):
        t = load_csv(write(tmp_path, "zone,fare\nA,abc\nB,2\n"), ZONE_FARE)
        assert np.isnan(t.column("fare")[0])
        assert t.missing_mask().tolist() == [True, False]

    def test_wrong_arity_names_line(self, tmp_path):
        with pytest.raises(DataError, match="line 3"):
            load_csv(write(tmp_path, "zone,fare\nA,1\nB,2,3\n"), ZONE_FARE)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv", ZONE_FARE)

    def test_csv_roundtrip(self, tmp_path, trips):
        p = tmp_path / "out.csv"
        trips.to_csv(p)
        assert load_csv(p, trips.schema).equals(trips)


class TestSchema:
    def test_duplicate_names(self):
        with pytest.raises(DataError):
            TableSchema((Column("a", ColumnKind.FLOAT), Column("a", ColumnKind.FLOAT)))

    def test_target_must_be_float(self):
        with pytest.raises(DataError):
            TableSchema((Column("a", ColumnKind.INTEGER),), target="a")

    def test_json_roundtrip(self, tmp_path):
        s = TableSchema((Column("a", ColumnKind.FLOAT), Column("b", ColumnKind.CATEGORICAL)), "a")
        s.save(tmp_path / "s.json")
        assert TableSchema.load(tmp_path / "s.json") == s


RAW = [("pickup", "categorical"), ("Ehail_fee", "float"), ("total", "float")]


class TestPreprocess:
    @pytest.mark.parametrize(
        "stamp,weekday,seconds",
        [
            ("2015-01-15 19:05:39", "3", 68739.0),
            ("2015-01-05 00:00:00", "0", 0.0),
            ("01/15/2015 07:05:39 PM", "3", 68739.0),
        ],
    )
    def test_datetime_expansion(self, stamp, weekday, seconds):
        t = table(RAW, [(stamp, np.nan, 10.0)], target="total")
        out = preprocess_trips(t, ["Ehail_fee"], ["pickup"])
        assert out.schema.names == ["pickup_weekday", "pickup_time", "total"]
        assert out.column("pickup_weekday")[0] == weekday
        assert out.column("pickup_time")[0] == seconds

    @pytest.mark.parametrize("day", range(1, 29))
    def test_weekday_matches_calendar_oracle(self, day):
        stamp = parse_datetime(f"2015-02-{day:02d} 12:00:00")
        assert stamp.weekday() == zeller_weekday(2015, 2, day)

    def test_all_missing_ehail_dropped_and_rows_kept(self):
        t = table(RAW, [("2015-01-05 00:00:00", np.nan, 1.0), ("2015-01-06 00:00:00", np.nan, 2.0)])
        out, stats = preprocess_trips(t, ["Ehail_fee"], ["pickup"], return_stats=True)
        assert "Ehail_fee" not in out.schema
        assert out.n_rows == 2 and stats.rows_removed == 0

    def test_bad_datetime_row_dropped_and_counted(self):
        t = table(RAW, [("garbage", 0.0, 1.0), ("2015-01-06 00:00:00", 0.0, 2.0)])
        out, stats = preprocess_trips(t, ["Ehail_fee"], ["pickup"], return_stats=True)
        assert out.n_rows == 1
        assert stats.unparseable_datetimes == 1 and stats.rows_removed == 1

    def test_rows_with_missing_removed(self):
        t = table(RAW, [("2015-01-05 00:00:00", 0.0, np.nan), ("2015-01-06 00:00:00", 0.0, 2.0)])
        out = preprocess_trips(t, ["Ehail_fee"], ["pickup"])
        assert out.n_rows == 1 and not out.missing_mask().any()

    def test_dropping_target_is_error(self):
        t = table(RAW, [("2015-01-05 00:00:00", 0.0, 1.0)], target="total")
        with pytest.raises(DataError):
            preprocess_trips(t, ["total"], [])

    def test_idempotent(self):
        t = table(RAW, [("2015-01-05 10:00:00", np.nan, 1.0), ("bad", np.nan, 2.0)], target="total")
        once = preprocess_trips(t, ["Ehail_fee"], ["pickup"])
        twice = preprocess_trips(once, ["Ehail_fee"], ["pickup"])
        assert once.equals(twice)


class TestSplit:
    def test_deterministic(self):
        t = table([("x", "float")], [(float(i),) for i in range(10)])
        a = split(t, SplitSpec(6, 4, 7))
        b = split(t, SplitSpec(6, 4, 7))
        assert a[0].equals(b[0]) and a[1].equals(b[1])

    def test_too_large(self):
        t = table([("x", "float")], [(float(i),) for i in range(10)])
        with pytest.raises(DataError):
            split(t, SplitSpec(6, 5, 0))

    def test_protocol_sizes(self):
        t = DataTable(TableSchema((Column("id", ColumnKind.FLOAT),)), {"id": np.arange(60000.0)})
        tr, ho = split(t, SplitSpec(40000, 20000, 1))
        assert tr.n_rows == 40000 and ho.n_rows == 20000
        assert not set(tr.column("id")) & set(ho.column("id"))


class TestEncoder:
    def test_min_max(self):
        t = table([("v", "float")], [(2.0,), (4.0,), (6.0,)])
        enc = fit_encoder(t)
        assert enc.numeric_ranges["v"] == (2.0, 6.0)
        np.testing.assert_array_equal(encode(t, enc).data[:, 0], [0.0, 0.5, 1.0])

    def test_clamp(self):
        enc = fit_encoder(table([("v", "float")], [(2.0,), (6.0,)]))
        assert encode(table([("v", "float")], [(8.0,)]), enc).data[0, 0] == 1.0

    def test_one_hot_order_and_unseen(self):
        enc = fit_encoder(table([("c", "categorical")], [("B",), ("A",)]))
        assert enc.vocabularies["c"] == ("A", "B")
        m = encode(table([("c", "categorical")], [("A",), ("B",), ("C",)]), enc).data
        np.testing.assert_array_equal(m, [[1, 0], [0, 1], [0, 0]])

    def test_constant_column_encodes_zero(self):
        t = table([("v", "float")], [(3.0,), (3.0,)])
        enc = fit_encoder(t)
        assert enc.numeric_ranges["v"] == (3.0, 3.0)
        assert not encode(t, enc).data.any()

    def test_schema_mismatch(self, trips):
        enc = fit_encoder(trips)
        with pytest.raises(DataError, match="schema mismatch"):
            encode(table([("vendor", "float")], [(1.0,)]), enc)

    def test_fit_table_properties(self, trips):
        enc = fit_encoder(trips)
        m = encode(trips, enc).data
        assert np.all(np.isfinite(m))
        for c in enc.columns:
            start, stop = enc.column_map[c.name]
            if c.kind is ColumnKind.CATEGORICAL:
                np.testing.assert_array_equal(m[:, start:stop].sum(axis=1), 1.0)
            else:
                assert m[:, start].min() == 0.0 and m[:, start].max() == 1.0

    def test_decode_roundtrip(self, trips):
        enc = fit_encoder(trips)
        back = decode(encode(trips, enc), enc, trips.schema)
        for c in trips.schema.columns:
            if c.kind is ColumnKind.CATEGORICAL:
                assert list(back.column(c.name)) == list(trips.column(c.name))
            else:
                np.testing.assert_allclose(back.column(c.name), trips.column(c.name), atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
    def test_encode_finite_in_unit_interval(self, values):
        t = table([("v", "float")], [(v,) for v in values])
        m = encode(t, fit_encoder(t)).data
        assert np.all(np.isfinite(m)) and m.min() >= 0 and m.max() <= 1
