"""Parsing and validation of the raw input file families.

Every parser is total: each input row either becomes a typed record or a
reject-report row carrying its line number and a reason, so that
``len(records) + len(rejects) == rows_in``. Files are comma-separated with a
documented header row; the exact column lists live in README.md.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import MissingInputError, SchemaError

COUPON_COLUMNS = [
    "itinerary_id", "seq", "ticketing_carrier", "operating_carrier",
    "origin", "destination", "passengers", "distance", "year", "quarter",
]
TICKET_COLUMNS = [
    "itinerary_id", "fare", "roundtrip", "credible", "bulk_fare",
    "coupons_outbound", "coupons_return",
]
MARKET_COLUMNS = ["itinerary_id", "direction", "origin", "destination"]
OWNERSHIP_COLUMNS = [
    "code", "carrier_name", "parent", "parent_major", "start_year", "end_year",
]
WEATHER_COLUMNS = [
    "station_id", "date", "precipitation", "snowfall", "snow_depth",
    "min_temperature",
]
STATION_COLUMNS = ["airport", "station_id"]
CPI_COLUMNS = ["year", "deflator"]
AIRPORT_STATE_COLUMNS = ["airport", "state"]

WEATHER_ELEMENTS = ["precipitation", "snowfall", "snow_depth", "min_temperature"]

#: Ticketing carriers (majors) recognized independently of the ownership
#: registry. Ticket-selling carriers observed in the data extend this set.
DEFAULT_MAJORS = frozenset(
    ["AA", "AS", "B6", "CO", "DL", "F9", "HP", "NW", "TW", "UA", "US", "WN"]
)

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


@dataclass
class ParseResult:
    """Typed records plus the reject report for one input file."""

    records: pd.DataFrame
    rejects: pd.DataFrame

    @property
    def n_rows(self) -> int:
        return len(self.records) + len(self.rejects)


def _read_raw(path: str | Path, columns: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"input file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    got = list(df.columns)
    if got != columns:
        raise SchemaError(
            f"{path.name}: header mismatch; expected {columns}, got {got}"
        )
    df.insert(0, "_line", np.arange(2, len(df) + 2))
    return df


def _flag(reasons: pd.Series, mask: pd.Series | np.ndarray, reason: str) -> None:
    """Record `reason` for rows in `mask` that have no earlier reason."""
    take = np.asarray(mask) & (reasons.values == "")
    reasons.iloc[take] = reason


def _to_int(s: pd.Series) -> pd.Series:
    return pd.to_numeric(s, errors="coerce").where(lambda v: v == v.round())


def _to_float(s: pd.Series) -> pd.Series:
    return pd.to_numeric(s.replace("", np.nan), errors="coerce")


def _to_bool(s: pd.Series) -> pd.Series:
    low = s.str.strip().str.lower()
    out = pd.Series(np.nan, index=s.index, dtype=object)
    out[low.isin(_TRUE)] = True
    out[low.isin(_FALSE)] = False
    return out


def _split(df: pd.DataFrame, reasons: pd.Series, typed: pd.DataFrame) -> ParseResult:
    bad = reasons != ""
    rejects = pd.DataFrame(
        {
            "line": df.loc[bad.values, "_line"].values,
            "reason": reasons[bad].values,
        }
    )
    records = typed.loc[~bad.values].reset_index(drop=True)
    return ParseResult(records=records, rejects=rejects)


def parse_coupons(path: str | Path) -> ParseResult:
    """Parse the coupon file: one row per flight segment of an itinerary."""
    df = _read_raw(path, COUPON_COLUMNS)
    reasons = pd.Series([""] * len(df))

    seq = _to_int(df["seq"])
    passengers = _to_int(df["passengers"])
    distance = _to_float(df["distance"])
    year = _to_int(df["year"])
    quarter = _to_int(df["quarter"])

    _flag(reasons, df["itinerary_id"].str.strip() == "", "empty itinerary_id")
    _flag(reasons, seq.isna() | (seq < 1), "bad sequence index")
    _flag(reasons, df["ticketing_carrier"].str.strip() == "", "empty ticketing carrier")
    _flag(reasons, df["operating_carrier"].str.strip() == "", "empty operating carrier")
    _flag(reasons, df["origin"].str.strip() == "", "empty origin")
    _flag(reasons, df["destination"].str.strip() == "", "empty destination")
    _flag(
        reasons,
        df["origin"].str.strip() == df["destination"].str.strip(),
        "origin equals destination",
    )
    _flag(reasons, passengers.isna(), "unparseable passengers")
    _flag(reasons, passengers <= 0, "nonpositive passengers")
    _flag(reasons, distance.isna() | (distance <= 0), "nonpositive distance")
    _flag(reasons, year.isna(), "unparseable year")
    _flag(reasons, quarter.isna() | ~quarter.isin([1, 2, 3, 4]), "quarter outside 1-4")

    typed = pd.DataFrame(
        {
            "itinerary_id": df["itinerary_id"].str.strip(),
            "seq": seq.astype("Int64"),
            "ticketing_carrier": df["ticketing_carrier"].str.strip(),
            "operating_carrier": df["operating_carrier"].str.strip(),
            "origin": df["origin"].str.strip(),
            "destination": df["destination"].str.strip(),
            "passengers": passengers.astype("Int64"),
            "distance": distance,
            "year": year.astype("Int64"),
            "quarter": quarter.astype("Int64"),
        }
    )
    out = _split(df, reasons, typed)
    rec = out.records
    for col in ("seq", "passengers", "year", "quarter"):
        rec[col] = rec[col].astype(np.int64)
    return out


def parse_tickets(path: str | Path) -> ParseResult:
    """Parse the ticket file: one row per itinerary with fare and flags."""
    df = _read_raw(path, TICKET_COLUMNS)
    reasons = pd.Series([""] * len(df))

    fare = _to_float(df["fare"])
    roundtrip = _to_bool(df["roundtrip"])
    credible = _to_bool(df["credible"])
    bulk = _to_bool(df["bulk_fare"])
    c_out = _to_int(df["coupons_outbound"])
    c_ret = _to_int(df["coupons_return"])

    _flag(reasons, df["itinerary_id"].str.strip() == "", "empty itinerary_id")
    _flag(reasons, fare.isna() | (fare < 0), "bad fare")
    _flag(reasons, roundtrip.isna(), "bad roundtrip flag")
    _flag(reasons, credible.isna(), "bad credible flag")
    _flag(reasons, bulk.isna(), "bad bulk_fare flag")
    _flag(reasons, c_out.isna() | (c_out < 1), "bad outbound coupon count")
    _flag(reasons, c_ret.isna() | (c_ret < 0), "bad return coupon count")
    _flag(
        reasons,
        (roundtrip == False) & (c_ret > 0),  # noqa: E712  (NaN-safe comparison)
        "return coupons on a one-way ticket",
    )

    typed = pd.DataFrame(
        {
            "itinerary_id": df["itinerary_id"].str.strip(),
            "fare": fare,
            "roundtrip": roundtrip,
            "credible": credible,
            "bulk_fare": bulk,
            "coupons_outbound": c_out.astype("Int64"),
            "coupons_return": c_ret.astype("Int64"),
        }
    )
    out = _split(df, reasons, typed)
    rec = out.records
    for col in ("roundtrip", "credible", "bulk_fare"):
        rec[col] = rec[col].astype(bool)
    for col in ("coupons_outbound", "coupons_return"):
        rec[col] = rec[col].astype(np.int64)
    return out


def parse_markets(path: str | Path) -> ParseResult:
    """Parse the directional-market file: endpoints per itinerary direction."""
    df = _read_raw(path, MARKET_COLUMNS)
    reasons = pd.Series([""] * len(df))

    direction = _to_int(df["direction"])
    _flag(reasons, df["itinerary_id"].str.strip() == "", "empty itinerary_id")
    _flag(reasons, direction.isna() | ~direction.isin([0, 1]), "direction outside {0,1}")
    _flag(reasons, df["origin"].str.strip() == "", "empty origin")
    _flag(reasons, df["destination"].str.strip() == "", "empty destination")
    _flag(
        reasons,
        df["origin"].str.strip() == df["destination"].str.strip(),
        "origin equals destination",
    )

    typed = pd.DataFrame(
        {
            "itinerary_id": df["itinerary_id"].str.strip(),
            "direction": direction.astype("Int64"),
            "origin": df["origin"].str.strip(),
            "destination": df["destination"].str.strip(),
        }
    )
    out = _split(df, reasons, typed)
    out.records["direction"] = out.records["direction"].astype(np.int64)
    return out


def parse_ownership(path: str | Path) -> ParseResult:
    """Parse the ownership registry transcribing the regional-carrier timeline.

    ``parent_major`` carries the major's code when the parent is a major's
    holding company and is empty otherwise. Intervals are inclusive years;
    overlapping intervals for one code reject the later row.
    """
    df = _read_raw(path, OWNERSHIP_COLUMNS)
    reasons = pd.Series([""] * len(df))

    start = _to_int(df["start_year"])
    end = _to_int(df["end_year"])
    _flag(reasons, df["code"].str.strip() == "", "empty code")
    _flag(reasons, start.isna(), "unparseable start_year")
    _flag(reasons, end.isna(), "unparseable end_year")
    _flag(reasons, start > end, "start_year after end_year")

    typed = pd.DataFrame(
        {
            "code": df["code"].str.strip(),
            "carrier_name": df["carrier_name"].str.strip(),
            "parent": df["parent"].str.strip(),
            "parent_major": df["parent_major"].str.strip(),
            "start_year": start.astype("Int64"),
            "end_year": end.astype("Int64"),
        }
    )

    # Interval overlap within a code: keep earlier lines, reject the offender.
    ok = reasons == ""
    latest_end: dict[str, int] = {}
    order = np.argsort(typed["start_year"].fillna(0).values, kind="stable")
    overlap = np.zeros(len(df), dtype=bool)
    for idx in order:
        if not ok.iloc[idx]:
            continue
        code = typed["code"].iloc[idx]
        s, e = typed["start_year"].iloc[idx], typed["end_year"].iloc[idx]
        if code in latest_end and s <= latest_end[code]:
            overlap[idx] = True
        else:
            latest_end[code] = int(e)
    _flag(reasons, overlap, "overlapping ownership interval")

    out = _split(df, reasons, typed)
    rec = out.records
    for col in ("start_year", "end_year"):
        rec[col] = rec[col].astype(np.int64)
    return out


def parse_weather(path: str | Path) -> ParseResult:
    """Parse daily station weather. Empty element fields stay missing (NaN)."""
    df = _read_raw(path, WEATHER_COLUMNS)
    reasons = pd.Series([""] * len(df))

    date = pd.to_datetime(df["date"], format="%Y-%m-%d", errors="coerce")
    precip = _to_float(df["precipitation"])
    snow = _to_float(df["snowfall"])
    depth = _to_float(df["snow_depth"])
    tmin = _to_float(df["min_temperature"])

    _flag(reasons, df["station_id"].str.strip() == "", "empty station_id")
    _flag(reasons, date.isna(), "unparseable date")
    _flag(reasons, (df["precipitation"] != "") & precip.isna(), "unparseable precipitation")
    _flag(reasons, (df["snowfall"] != "") & snow.isna(), "unparseable snowfall")
    _flag(reasons, (df["snow_depth"] != "") & depth.isna(), "unparseable snow_depth")
    _flag(reasons, (df["min_temperature"] != "") & tmin.isna(), "unparseable min_temperature")
    _flag(reasons, precip < 0, "negative precipitation")
    _flag(reasons, snow < 0, "negative snowfall")
    _flag(reasons, depth < 0, "negative snow_depth")

    dup = pd.DataFrame({"s": df["station_id"].str.strip(), "d": date}).duplicated()
    _flag(reasons, dup & (reasons == "").values, "duplicate station-date")

    typed = pd.DataFrame(
        {
            "station_id": df["station_id"].str.strip(),
            "date": date,
            "precipitation": precip,
            "snowfall": snow,
            "snow_depth": depth,
            "min_temperature": tmin,
        }
    )
    return _split(df, reasons, typed)


def parse_airport_stations(path: str | Path) -> ParseResult:
    """Parse the airport-to-weather-station map (one station per airport)."""
    df = _read_raw(path, STATION_COLUMNS)
    reasons = pd.Series([""] * len(df))
    _flag(reasons, df["airport"].str.strip() == "", "empty airport")
    _flag(reasons, df["station_id"].str.strip() == "", "empty station_id")
    _flag(reasons, df["airport"].str.strip().duplicated().values, "duplicate airport")
    typed = pd.DataFrame(
        {
            "airport": df["airport"].str.strip(),
            "station_id": df["station_id"].str.strip(),
        }
    )
    return _split(df, reasons, typed)


def parse_cpi(path: str | Path) -> dict[int, float]:
    """Read the deflator table (base year value 1.0) as {year: deflator}."""
    df = _read_raw(path, CPI_COLUMNS)
    year = _to_int(df["year"])
    defl = _to_float(df["deflator"])
    bad = year.isna() | defl.isna() | (defl <= 0)
    if bad.any():
        raise SchemaError(f"cpi table: unparseable rows at lines {list(df.loc[bad.values, '_line'])}")
    return dict(zip(year.astype(int), defl.astype(float)))


def parse_airport_states(path: str | Path) -> pd.DataFrame:
    df = _read_raw(path, AIRPORT_STATE_COLUMNS)
    return pd.DataFrame(
        {"airport": df["airport"].str.strip(), "state": df["state"].str.strip()}
    )


def load_weather(
    weather: pd.DataFrame,
    stations: pd.DataFrame,
    airports: list[str] | None = None,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Join daily observations to airports through the station map.

    Returns ``(joined, coverage)`` where `joined` has one row per
    airport-date and `coverage` reports, for every airport in the requested
    universe, the mapped station (if any) and the number of observed days.
    Airports with no station or no observations appear with zero days and are
    treated as missing downstream.
    """
    universe = sorted(set(stations["airport"]).union(airports or []))
    joined = stations.merge(weather, on="station_id", how="inner")
    counts = joined.groupby("airport").size() if len(joined) else pd.Series(dtype=int)
    station_of = dict(zip(stations["airport"], stations["station_id"]))
    coverage = pd.DataFrame(
        {
            "airport": universe,
            "station_id": [station_of.get(a, "") for a in universe],
            "n_days": [int(counts.get(a, 0)) for a in universe],
        }
    )
    return joined.reset_index(drop=True), coverage


class RegionalClass(enum.Enum):
    MAJOR = "MAJOR"
    INDEPENDENT_REGIONAL = "INDEPENDENT_REGIONAL"
    SUBSIDIARY_REGIONAL = "SUBSIDIARY_REGIONAL"


class UnknownCarrierError(KeyError):
    """Raised under the 'reject' policy for codes absent from the registry."""


@dataclass
class CarrierRegistry:
    """Ownership registry plus the major-carrier universe.

    Classification is a pure function of (code, year, registry): codes in the
    majors set are MAJOR; codes covered by a registry interval are regional,
    subsidiary when ``parent_major`` is set; anything else follows
    ``unknown_policy`` ('reject' raises, 'major' classifies MAJOR).
    """

    records: pd.DataFrame
    majors: frozenset = DEFAULT_MAJORS
    unknown_policy: str = "reject"
    _warned: set = field(default_factory=set, repr=False)

    def with_majors(self, extra: set[str]) -> "CarrierRegistry":
        return CarrierRegistry(
            records=self.records,
            majors=frozenset(self.majors | set(extra)),
            unknown_policy=self.unknown_policy,
        )

    def classify(self, code: str, year: int) -> RegionalClass:
        if code in self.majors:
            return RegionalClass.MAJOR
        rows = self.records
        hit = rows[
            (rows["code"] == code)
            & (rows["start_year"] <= year)
            & (rows["end_year"] >= year)
        ]
        if len(hit):
            if hit["parent_major"].iloc[0] != "":
                return RegionalClass.SUBSIDIARY_REGIONAL
            return RegionalClass.INDEPENDENT_REGIONAL
        if self.unknown_policy == "major":
            return RegionalClass.MAJOR
        raise UnknownCarrierError(f"carrier {code!r} unknown in {year}")

    def classify_frame(self, codes: pd.Series, years: pd.Series) -> pd.Series:
        """Vectorized classification; same semantics as `classify`."""
        key = pd.DataFrame({"code": codes.values, "year": years.values})
        uniq = key.drop_duplicates().reset_index(drop=True)
        merged = uniq.merge(self.records, on="code", how="left")
        covered = merged[
            (merged["start_year"] <= merged["year"])
            & (merged["end_year"] >= merged["year"])
        ].drop_duplicates(subset=["code", "year"])
        label = {}
        cov = {
            (c, y): pm
            for c, y, pm in zip(covered["code"], covered["year"], covered["parent_major"])
        }
        unknown = []
        for c, y in zip(uniq["code"], uniq["year"]):
            if c in self.majors:
                label[(c, y)] = RegionalClass.MAJOR
            elif (c, y) in cov:
                label[(c, y)] = (
                    RegionalClass.SUBSIDIARY_REGIONAL
                    if cov[(c, y)] != ""
                    else RegionalClass.INDEPENDENT_REGIONAL
                )
            elif self.unknown_policy == "major":
                label[(c, y)] = RegionalClass.MAJOR
            else:
                unknown.append((c, int(y)))
        if unknown:
            raise UnknownCarrierError(
                f"unknown carrier codes (code, year): {sorted(set(unknown))[:10]}"
            )
        return pd.Series(
            [label[(c, y)] for c, y in zip(codes.values, years.values)],
            index=codes.index,
        )


def classify_regional(code: str, year: int, registry: CarrierRegistry) -> RegionalClass:
    """Classify one operating-carrier code for a calendar year."""
    return registry.classify(code, year)


def load_registry(path: str | Path, unknown_policy: str = "reject") -> CarrierRegistry:
    parsed = parse_ownership(path)
    return CarrierRegistry(records=parsed.records, unknown_policy=unknown_policy)


def packaged_data(name: str) -> Path:
    from importlib import resources

    return Path(str(resources.files("airpanel") / "data" / name))


def load_default_registry(unknown_policy: str = "reject") -> CarrierRegistry:
    """Registry from the packaged ownership timeline transcription."""
    return load_registry(packaged_data("ownership.csv"), unknown_policy)


def load_default_airport_states() -> pd.DataFrame:
    return parse_airport_states(packaged_data("airport_states.csv"))


def load_default_cpi() -> dict[int, float]:
    return parse_cpi(packaged_data("cpi.csv"))
