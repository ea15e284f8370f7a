"""Aggregation of trip observations into the carrier-market-period panel.

A market is a unidirectional airport pair; the panel has one row per
(ticketing carrier, market, year, quarter) with the passenger-weighted price,
traffic, the passenger-seat-mile decomposition into independent-regional
operated miles, and network-size controls (markets served out of each
endpoint, in hundreds).
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .ingest import CarrierRegistry, RegionalClass

PANEL_COLUMNS = [
    "carrier", "origin", "destination", "market", "year", "quarter",
    "price", "traffic", "pax_seat_miles_total", "pax_seat_miles_regional",
    "regional_share", "network_origin", "network_destination",
]


def explode_segments(obs: pd.DataFrame) -> pd.DataFrame:
    """One row per flight segment of each observation."""
    n = obs["n_segments"].to_numpy()
    idx = np.repeat(obs.index.to_numpy(), n)
    seg = obs.loc[idx, ["obs_id", "ticketing_carrier", "origin", "destination",
                        "passengers", "year", "quarter"]].reset_index(drop=True)
    ops, dists, seg_o, seg_d = [], [], [], []
    for path, operators, distances in zip(obs["path"], obs["operators"], obs["distances"]):
        airports = path.split(":")
        ops.extend(operators.split(":"))
        dists.extend(float(x) for x in distances.split(":"))
        seg_o.extend(airports[:-1])
        seg_d.extend(airports[1:])
    seg["operating_carrier"] = ops
    seg["distance"] = dists
    seg["seg_origin"] = seg_o
    seg["seg_destination"] = seg_d
    return seg


def _classify_operators(seg: pd.DataFrame, registry: CarrierRegistry) -> pd.Series:
    """True for segments operated by an independent regional carrier."""
    reg = registry.with_majors(set(seg["ticketing_carrier"]))
    labels = reg.classify_frame(seg["operating_carrier"], seg["year"])
    independent = labels == RegionalClass.INDEPENDENT_REGIONAL
    # A carrier that sells the ticket is by definition not a regional on it.
    return independent & (seg["operating_carrier"] != seg["ticketing_carrier"])


def network_sizes(obs: pd.DataFrame) -> pd.DataFrame:
    """Distinct markets served out of each airport, per carrier and period."""
    mk = obs[["ticketing_carrier", "origin", "destination", "year", "quarter"]]
    mk = mk.drop_duplicates()
    out = (
        mk.groupby(["ticketing_carrier", "origin", "year", "quarter"])
        .size()
        .rename("n_markets")
        .reset_index()
        .rename(columns={"ticketing_carrier": "carrier", "origin": "airport"})
    )
    return out


def aggregate_panel(obs: pd.DataFrame, registry: CarrierRegistry) -> pd.DataFrame:
    """Build the carrier-market-period panel from filtered observations."""
    if len(obs) == 0:
        return pd.DataFrame(columns=PANEL_COLUMNS)

    seg = explode_segments(obs)
    seg["regional_op"] = _classify_operators(seg, registry)
    seg["pax_miles"] = seg["passengers"] * seg["distance"]
    seg["pax_miles_reg"] = seg["pax_miles"].where(seg["regional_op"], 0.0)

    miles = seg.groupby("obs_id", sort=False).agg(
        pax_sm=("pax_miles", "sum"), pax_sm_reg=("pax_miles_reg", "sum")
    )
    o = obs.merge(miles, left_on="obs_id", right_index=True, how="left")
    o["revenue"] = o["fare"] * o["passengers"]

    keys = ["ticketing_carrier", "origin", "destination", "year", "quarter"]
    cell = o.groupby(keys, sort=True).agg(
        revenue=("revenue", "sum"),
        traffic=("passengers", "sum"),
        pax_seat_miles_total=("pax_sm", "sum"),
        pax_seat_miles_regional=("pax_sm_reg", "sum"),
    ).reset_index().rename(columns={"ticketing_carrier": "carrier"})
    cell["price"] = cell["revenue"] / cell["traffic"]
    cell["regional_share"] = np.where(
        cell["pax_seat_miles_total"] > 0,
        cell["pax_seat_miles_regional"] / cell["pax_seat_miles_total"],
        np.nan,
    )
    cell["market"] = cell["origin"] + "-" + cell["destination"]

    nets = network_sizes(obs)
    cell = cell.merge(
        nets.rename(columns={"airport": "origin", "n_markets": "net_o"}),
        on=["carrier", "origin", "year", "quarter"], how="left",
    )
    cell = cell.merge(
        nets.rename(columns={"airport": "destination", "n_markets": "net_d"}),
        on=["carrier", "destination", "year", "quarter"], how="left",
    )
    cell["network_origin"] = cell["net_o"].fillna(0.0) / 100.0
    cell["network_destination"] = cell["net_d"].fillna(0.0) / 100.0
    return cell[PANEL_COLUMNS].sort_values(
        ["year", "quarter", "market", "carrier"], kind="stable"
    ).reset_index(drop=True)


def regional_share(cell: pd.Series | pd.DataFrame) -> float | pd.Series:
    """Fraction of a cell's passenger-seat miles on independent regionals."""
    total = cell["pax_seat_miles_total"]
    if np.any(np.asarray(total) <= 0):
        raise ValueError("regional share undefined for zero total seat-miles")
    return cell["pax_seat_miles_regional"] / total


def usage_shares(obs: pd.DataFrame, registry: CarrierRegistry) -> pd.DataFrame:
    """Per-regional passenger shares for each major, market and period.

    The share for a (regional k, major j, market, period) is the fraction of
    j's passengers in the market that flew at least one segment operated by
    k; a passenger whose path uses k on two segments counts once. The
    passenger numerator is kept for the concentration index.
    """
    cols = ["market", "year", "quarter", "major", "regional", "passengers", "share"]
    if len(obs) == 0:
        return pd.DataFrame(columns=cols)

    seg = explode_segments(obs)
    seg["regional_op"] = _classify_operators(seg, registry)
    reg_seg = seg[seg["regional_op"]]
    # Deduplicate to one row per observation-regional pair.
    per_obs = reg_seg[["obs_id", "operating_carrier"]].drop_duplicates()
    per_obs = per_obs.merge(
        obs[["obs_id", "ticketing_carrier", "origin", "destination",
             "year", "quarter", "passengers"]],
        on="obs_id",
    )
    num = per_obs.groupby(
        ["ticketing_carrier", "origin", "destination", "year", "quarter",
         "operating_carrier"], sort=True,
    )["passengers"].sum().rename("reg_pax").reset_index()

    denom = obs.groupby(
        ["ticketing_carrier", "origin", "destination", "year", "quarter"], sort=True
    )["passengers"].sum().rename("total_pax").reset_index()

    out = num.merge(
        denom, on=["ticketing_carrier", "origin", "destination", "year", "quarter"]
    )
    out["share"] = out["reg_pax"] / out["total_pax"]
    out["market"] = out["origin"] + "-" + out["destination"]
    out = out.rename(
        columns={
            "ticketing_carrier": "major",
            "operating_carrier": "regional",
            "reg_pax": "passengers",
        }
    )
    return out[cols].sort_values(
        ["year", "quarter", "market", "major", "regional"], kind="stable"
    ).reset_index(drop=True)
