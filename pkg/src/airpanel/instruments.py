"""Excluded-variable construction: weather, regional-network and network IVs.

Weather instruments take each carrier's worst quarterly-average conditions
over every airport its paths touch in a market (max for the precipitation
family, min for minimum temperature); competitor versions sum those extremes
over the other majors in the market. The regional-network instrument averages
the network size of the regionals each competitor uses, then aggregates over
competitors; the network instrument aggregates competitors' market counts out
of the two endpoints. Missing weather propagates as missing and is counted.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .ingest import CarrierRegistry
from .panel import _classify_operators, explode_segments, network_sizes

PERIOD = ["year", "quarter"]
CELL = ["carrier", "market"] + PERIOD

WX_MAX = ["precipitation", "snowfall", "snow_depth"]
WX_MIN = ["min_temperature"]
WX = WX_MAX + WX_MIN

INSTRUMENT_COLUMNS = CELL + [
    f"own_wx_{e}" for e in WX
] + [
    f"comp_wx_{e}" for e in WX
] + [
    "n_missing_comp_wx", "comp_regional_network",
    "comp_net_origin_sum", "comp_net_origin_mean",
    "comp_net_dest_sum", "comp_net_dest_mean",
    "n_competitors",
]


def quarterly_weather(joined: pd.DataFrame) -> pd.DataFrame:
    """Quarterly per-airport means of the four elements, available days only.

    ``joined`` is the airport-keyed daily table from ingest.load_weather.
    Airport-quarters with no observed days for an element stay absent; per
    element day counts are recorded.
    """
    if len(joined) == 0:
        cols = ["airport"] + PERIOD
        for e in WX:
            cols += [f"avg_{e}", f"n_{e}"]
        return pd.DataFrame(columns=cols)
    df = joined.copy()
    df["year"] = df["date"].dt.year.astype(np.int64)
    df["quarter"] = ((df["date"].dt.month - 1) // 3 + 1).astype(np.int64)
    g = df.groupby(["airport"] + PERIOD, sort=True)
    out = g.size().rename("n_days").reset_index()[["airport"] + PERIOD]
    for e in WX:
        agg = g[e].agg(["mean", "count"])
        out[f"avg_{e}"] = agg["mean"].values
        out[f"n_{e}"] = agg["count"].values.astype(np.int64)
    return out


def carrier_airports(obs: pd.DataFrame) -> pd.DataFrame:
    """Distinct airports touched by each carrier's paths in a market-period."""
    rows = []
    seen = set()
    for carrier, o, d, y, q, path in zip(
        obs["ticketing_carrier"], obs["origin"], obs["destination"],
        obs["year"], obs["quarter"], obs["path"],
    ):
        market = f"{o}-{d}"
        for airport in path.split(":"):
            key = (carrier, market, y, q, airport)
            if key not in seen:
                seen.add(key)
                rows.append(key)
    return pd.DataFrame(rows, columns=["carrier", "market", "year", "quarter", "airport"])


def route_extreme_weather(
    touched: pd.DataFrame, qweather: pd.DataFrame
) -> pd.DataFrame:
    """Worst quarterly-average conditions over the airports a carrier touches.

    Maximum for precipitation, snowfall and snow depth; minimum for minimum
    temperature. Airports without data for an element are skipped; a cell
    with no data at all for an element keeps it missing.
    """
    merged = touched.merge(qweather, on=["airport"] + PERIOD, how="left")
    g = merged.groupby(CELL, sort=True)
    out = g.size().rename("n_airports").reset_index()[CELL]
    for e in WX_MAX:
        out[f"own_wx_{e}"] = g[f"avg_{e}"].max().values
    for e in WX_MIN:
        out[f"own_wx_{e}"] = g[f"avg_{e}"].min().values
    return out


def competitor_weather_iv(extremes: pd.DataFrame) -> pd.DataFrame:
    """Element-wise sums of the other majors' route extremes in the market.

    Competitors with a missing element are skipped in that element's sum and
    counted in ``n_missing_comp_wx``. Monopoly cells keep the competitor
    columns missing.
    """
    df = extremes.copy()
    own_cols = [f"own_wx_{e}" for e in WX]
    mkt = ["market"] + PERIOD
    g = df.groupby(mkt, sort=False)
    totals = g[own_cols].transform("sum")
    counts = g[own_cols].transform("count")
    n = g["carrier"].transform("size")
    for e in WX:
        oc = f"own_wx_{e}"
        comp_sum = totals[oc] - df[oc].fillna(0.0)
        comp_n = counts[oc] - df[oc].notna().astype(int)
        df[f"comp_wx_{e}"] = comp_sum.where((n >= 2) & (comp_n >= 1))
    present = df[own_cols].notna().all(axis=1).astype(int)
    n_full = g["carrier"].transform("size") - (
        df.assign(_f=present).groupby(mkt, sort=False)["_f"].transform("sum")
    )
    df["n_missing_comp_wx"] = (n_full - (1 - present)).where(n >= 2)
    df["n_competitors"] = (n - 1).astype(np.int64)
    return df[CELL + [f"comp_wx_{e}" for e in WX] + ["n_missing_comp_wx", "n_competitors"]]


def regional_network_sizes(obs: pd.DataFrame, registry: CarrierRegistry) -> pd.DataFrame:
    """Distinct airports each independent regional touches, per period."""
    seg = explode_segments(obs)
    seg["regional_op"] = _classify_operators(seg, registry)
    reg = seg[seg["regional_op"]]
    if len(reg) == 0:
        return pd.DataFrame(columns=["regional"] + PERIOD + ["n_airports"])
    ends = pd.concat(
        [
            reg[["operating_carrier", "year", "quarter", "seg_origin"]].rename(
                columns={"seg_origin": "airport"}
            ),
            reg[["operating_carrier", "year", "quarter", "seg_destination"]].rename(
                columns={"seg_destination": "airport"}
            ),
        ],
        ignore_index=True,
    ).drop_duplicates()
    out = (
        ends.groupby(["operating_carrier"] + PERIOD, sort=True)
        .size()
        .rename("n_airports")
        .reset_index()
        .rename(columns={"operating_carrier": "regional"})
    )
    return out


def regional_network_iv(
    shares: pd.DataFrame,
    regional_networks: pd.DataFrame,
    presence: pd.DataFrame,
    aggregate: str = "sum",
) -> pd.DataFrame:
    """Competitors' average regional network size, aggregated per carrier.

    For each major: take the mean network size of the regionals every other
    present major uses in the market, then sum (or average, per ``aggregate``)
    those means over the competitors. Competitors using no regional
    contribute zero under ``sum``.
    """
    mkt = ["market"] + PERIOD
    pos = shares[shares["share"] > 0]
    if len(pos):
        regional_networks = regional_networks.reindex(
            columns=["regional"] + PERIOD + ["n_airports"]
        )
        use = pos.merge(regional_networks, on=["regional"] + PERIOD, how="left")
        use["n_airports"] = use["n_airports"].astype(float).fillna(0.0)
        per_major = (
            use.groupby(mkt + ["major"], sort=False)["n_airports"].mean().rename("avg_net")
        ).reset_index()
    else:
        per_major = pd.DataFrame(columns=mkt + ["major", "avg_net"])

    cells = presence.rename(columns={"carrier": "major"})[mkt + ["major"]].drop_duplicates()
    if len(per_major):
        cells = cells.merge(per_major, on=mkt + ["major"], how="left")
    else:
        cells["avg_net"] = np.nan
    cells["avg_net"] = cells["avg_net"].astype(float).fillna(0.0)
    g = cells.groupby(mkt, sort=False)
    total = g["avg_net"].transform("sum")
    n = g["major"].transform("size")
    comp = total - cells["avg_net"]
    if aggregate == "mean":
        comp = comp / (n - 1).replace(0, np.nan)
    cells["comp_regional_network"] = comp.where(n >= 2)
    out = cells.rename(columns={"major": "carrier"})
    return out[CELL + ["comp_regional_network"]]


def network_iv(
    presence: pd.DataFrame, net_sizes: pd.DataFrame
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Aggregate competitors' market counts out of both market endpoints.

    Returns fixed-arity features (sum and mean of competitors' origin and
    destination counts) plus the raw per-competitor table for audit.
    """
    mkt = ["market"] + PERIOD
    cells = presence[CELL].drop_duplicates().copy()
    cells[["origin", "destination"]] = cells["market"].str.split("-", expand=True)

    net_sizes = net_sizes.reindex(columns=["carrier", "airport"] + PERIOD + ["n_markets"])
    no = net_sizes.rename(columns={"airport": "origin", "n_markets": "net_origin"})
    nd = net_sizes.rename(columns={"airport": "destination", "n_markets": "net_dest"})
    cells = cells.merge(no, on=["carrier", "origin"] + PERIOD, how="left")
    cells = cells.merge(nd, on=["carrier", "destination"] + PERIOD, how="left")
    cells["net_origin"] = cells["net_origin"].astype(float).fillna(0.0)
    cells["net_dest"] = cells["net_dest"].astype(float).fillna(0.0)

    g = cells.groupby(mkt, sort=False)
    n = g["carrier"].transform("size")
    feats = cells[CELL].copy()
    for col in ("net_origin", "net_dest"):
        total = g[col].transform("sum")
        comp_sum = total - cells[col]
        name = "origin" if col == "net_origin" else "dest"
        feats[f"comp_net_{name}_sum"] = comp_sum.where(n >= 2)
        feats[f"comp_net_{name}_mean"] = (comp_sum / (n - 1).replace(0, np.nan)).where(n >= 2)

    raw = cells.merge(
        cells[mkt + ["carrier", "net_origin", "net_dest"]].rename(
            columns={
                "carrier": "competitor",
                "net_origin": "competitor_net_origin",
                "net_dest": "competitor_net_dest",
            }
        ),
        on=mkt,
    )
    raw = raw[raw["competitor"] != raw["carrier"]]
    raw = raw[CELL + ["competitor", "competitor_net_origin", "competitor_net_dest"]]
    return feats, raw.sort_values(CELL + ["competitor"], kind="stable").reset_index(drop=True)


def build_instruments(
    obs: pd.DataFrame,
    pnl: pd.DataFrame,
    qweather: pd.DataFrame,
    registry: CarrierRegistry,
    regional_aggregate: str = "sum",
) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Assemble the per-cell instrument table from pipeline checkpoints.

    Returns ``(instruments, network_raw, report)`` where `report` counts the
    cells with missing own or competitor weather and monopoly cells.
    """
    presence = pnl[CELL].drop_duplicates()

    touched = carrier_airports(obs)
    extremes = route_extreme_weather(touched, qweather)
    comp_wx = competitor_weather_iv(extremes)

    reg_nets = regional_network_sizes(obs, registry)
    from .panel import usage_shares as _usage_shares

    shares = _usage_shares(obs, registry)
    reg_iv = regional_network_iv(shares, reg_nets, presence, regional_aggregate)

    net_feats, net_raw = network_iv(presence, network_sizes(obs))

    out = presence.merge(extremes, on=CELL, how="left")
    out = out.merge(comp_wx, on=CELL, how="left")
    out = out.merge(reg_iv, on=CELL, how="left")
    out = out.merge(net_feats, on=CELL, how="left")
    out = out[INSTRUMENT_COLUMNS].sort_values(CELL, kind="stable").reset_index(drop=True)

    own_cols = [f"own_wx_{e}" for e in WX]
    comp_cols = [f"comp_wx_{e}" for e in WX]
    report = pd.DataFrame(
        [
            {"item": "cells_total", "count": len(out)},
            {"item": "cells_missing_own_weather", "count": int(out[own_cols].isna().any(axis=1).sum())},
            {"item": "cells_missing_competitor_weather", "count": int(out[comp_cols].isna().any(axis=1).sum())},
            {"item": "monopoly_cells", "count": int((out["n_competitors"] == 0).sum())},
        ]
    )
    return out, net_raw, report
