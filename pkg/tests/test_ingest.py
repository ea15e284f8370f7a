"""Parsing, reject reports, carrier classification, weather loading."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airpanel import ingest
from airpanel.errors import MissingInputError, SchemaError

from conftest import write_csv

COUPON_HEADER = ",".join(ingest.COUPON_COLUMNS)


def test_parse_coupons_well_formed(tmp_path):
    path = write_csv(
        tmp_path, "c.csv",
        f"""
        {COUPON_HEADER}
        A,1,AA,OO,CHO,CLT,10,150,2010,2
        A,2,AA,AA,CLT,DFW,10,300,2010,2
        B,1,DL,DL,CHO,ATL,5,200,2010,2
        """,
    )
    out = ingest.parse_coupons(path)
    assert len(out.records) == 3
    assert len(out.rejects) == 0
    assert out.records["passengers"].tolist() == [10, 10, 5]


def test_parse_coupons_rejects_nonpositive_passengers(tmp_path):
    path = write_csv(
        tmp_path, "c.csv",
        f"""
        {COUPON_HEADER}
        A,1,AA,OO,CHO,CLT,0,150,2010,2
        B,1,DL,DL,CHO,ATL,5,200,2010,2
        """,
    )
    out = ingest.parse_coupons(path)
    assert len(out.records) == 1
    assert out.rejects["reason"].tolist() == ["nonpositive passengers"]
    assert out.rejects["line"].tolist() == [2]


def test_parse_coupons_cho_dfw_example(tmp_path):
    from conftest import cho_dfw_files

    files = cho_dfw_files(tmp_path)
    out = ingest.parse_coupons(files["coupons"])
    assert len(out.rejects) == 0
    cho = out.records[out.records["itinerary_id"].isin(["IT1", "IT2", "IT3"])]
    assert len(cho) == 6
    assert cho["itinerary_id"].nunique() == 3


def test_missing_file_and_schema_mismatch(tmp_path):
    with pytest.raises(MissingInputError):
        ingest.parse_coupons(tmp_path / "nope.csv")
    path = write_csv(tmp_path, "c.csv", "a,b\n1,2\n")
    with pytest.raises(SchemaError):
        ingest.parse_coupons(path)


def test_parsing_is_total_and_deterministic(tmp_path):
    path = write_csv(
        tmp_path, "c.csv",
        f"""
        {COUPON_HEADER}
        A,1,AA,OO,CHO,CLT,10,150,2010,2
        A,x,AA,AA,CLT,DFW,10,300,2010,2
        ,1,DL,DL,CHO,ATL,5,200,2010,2
        B,1,DL,DL,CHO,CHO,5,200,2010,2
        B,1,DL,DL,CHO,ATL,5,-1,2010,2
        B,1,DL,DL,CHO,ATL,5,200,2010,7
        """,
    )
    first = ingest.parse_coupons(path)
    assert first.n_rows == 6
    assert len(first.records) == 1
    again = ingest.parse_coupons(path)
    pd.testing.assert_frame_equal(first.records, again.records)
    pd.testing.assert_frame_equal(first.rejects, again.rejects)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["A", "B", ""]),
            st.sampled_from(["1", "2", "0", "x"]),
            st.sampled_from(["CHO", "DFW"]),
            st.sampled_from(["CHO", "ATL"]),
            st.sampled_from(["5", "0", "-1", "y"]),
        ),
        max_size=12,
    )
)
def test_parse_totality_property(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("tot")
    body = "\n".join(
        f"{i},{s},AA,OO,{o},{d},{p},100,2010,2" for i, s, o, d, p in rows
    )
    path = write_csv(tmp, "c.csv", f"{COUPON_HEADER}\n{body}\n")
    out = ingest.parse_coupons(path)
    assert len(out.records) + len(out.rejects) == len(rows)


def test_ticket_invariant_return_coupons(tmp_path):
    path = write_csv(
        tmp_path, "t.csv",
        f"""
        {",".join(ingest.TICKET_COLUMNS)}
        A,100,false,true,false,2,0
        B,100,false,true,false,2,1
        C,100,true,true,false,2,2
        """,
    )
    out = ingest.parse_tickets(path)
    assert len(out.records) == 2
    assert out.rejects["reason"].tolist() == ["return coupons on a one-way ticket"]


def test_ownership_overlap_rejected(tmp_path):
    path = write_csv(
        tmp_path, "o.csv",
        f"""
        {",".join(ingest.OWNERSHIP_COLUMNS)}
        ZZ,Zed Air,Alpha Holdings,,1998,2005
        ZZ,Zed Air,Beta Holdings,,2004,2010
        ZZ,Zed Air,Gamma Holdings,,2006,2010
        """,
    )
    out = ingest.parse_ownership(path)
    assert len(out.records) == 2
    assert out.rejects["reason"].tolist() == ["overlapping ownership interval"]


def test_classify_regional_examples(registry):
    assert registry.classify("OO", 2010) is ingest.RegionalClass.INDEPENDENT_REGIONAL
    assert registry.classify("MQ", 2005) is ingest.RegionalClass.SUBSIDIARY_REGIONAL
    assert registry.classify("S5", 2003) is ingest.RegionalClass.INDEPENDENT_REGIONAL
    assert registry.classify("AA", 2005) is ingest.RegionalClass.MAJOR


def test_classify_unknown_policy(registry):
    with pytest.raises(ingest.UnknownCarrierError):
        registry.classify("Q9", 2010)
    lax = ingest.CarrierRegistry(
        records=registry.records, unknown_policy="major"
    )
    assert lax.classify("Q9", 2010) is ingest.RegionalClass.MAJOR


def test_classify_frame_matches_scalar(registry):
    codes = pd.Series(["OO", "MQ", "AA", "S5", "MQ"])
    years = pd.Series([2010, 2005, 2001, 2003, 2015])
    got = registry.classify_frame(codes, years)
    want = [registry.classify(c, y) for c, y in zip(codes, years)]
    assert got.tolist() == want


def weather_frame(days, station="S1", missing_snow_days=()):
    rows = []
    for d in range(days):
        date = pd.Timestamp("2010-04-01") + pd.Timedelta(days=d)
        rows.append(
            {
                "station_id": station,
                "date": date,
                "precipitation": 10.0,
                "snowfall": np.nan if d in missing_snow_days else 2.0,
                "snow_depth": 0.0,
                "min_temperature": 50.0,
            }
        )
    return pd.DataFrame(rows)


def test_load_weather_joins_and_coverage():
    weather = pd.concat(
        [weather_frame(90, "S1"), weather_frame(90, "S2")], ignore_index=True
    )
    stations = pd.DataFrame(
        {"airport": ["CHO", "DFW"], "station_id": ["S1", "S2"]}
    )
    joined, coverage = ingest.load_weather(weather, stations, airports=["CHO", "DFW", "MCO"])
    assert len(joined) == 180
    cov = coverage.set_index("airport")
    assert cov.loc["MCO", "n_days"] == 0
    assert cov.loc["MCO", "station_id"] == ""
    assert cov.loc["CHO", "n_days"] == 90


def test_load_weather_missing_days_not_zero_filled():
    # 90-day quarter with 10 missing snowfall days: 80 values remain for the
    # quarterly average; nothing is zero-filled.
    weather = weather_frame(90, missing_snow_days=range(10))
    stations = pd.DataFrame({"airport": ["CHO"], "station_id": ["S1"]})
    joined, _ = ingest.load_weather(weather, stations)
    assert joined["snowfall"].notna().sum() == 80
    assert joined["snowfall"].dropna().eq(2.0).all()
    from airpanel import instruments

    q = instruments.quarterly_weather(joined)
    assert q["n_snowfall"].iloc[0] == 80
    assert q["avg_snowfall"].iloc[0] == 2.0
