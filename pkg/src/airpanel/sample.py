"""Construction of the analysis sample of directional trip observations.

The filter sequence is pinned (order matters for the percentile rules):
configured quarters -> contiguous-48 -> coupon count -> interline/bulk/
credibility -> roundtrip split -> deflate -> $20 floor -> fare percentile ->
yield percentile. A drops report records every itinerary or observation
removed, with a reason, so injected violations can be audited exactly.
"""

from __future__ import annotations

import math

import numpy as np
import pandas as pd

from .errors import DeflatorError

#: States outside the contiguous United States.
NON_CONTIGUOUS = {"AK", "HI", "PR", "VI", "GU", "AS", "MP"}

OBSERVATION_COLUMNS = [
    "obs_id", "itinerary_id", "direction", "ticketing_carrier",
    "origin", "destination", "path", "operators", "distances",
    "n_segments", "total_distance", "passengers", "fare", "year", "quarter",
]


def nearest_rank_percentile(values: np.ndarray, p: float) -> float:
    """Percentile by rank on sorted data, averaging at exact integer ranks.

    With v sorted ascending and h = n*p/100: returns (v[h-1]+v[h])/2 when h is
    an integer, else v[ceil(h)-1]. The midpoint at exact ranks makes an
    inclusive [p1, p99] window drop exactly the top and bottom percent on
    distinct values while keeping a degenerate (all-equal) distribution whole.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise ValueError("percentile of empty set")
    h = n * p / 100.0
    if h < 1:
        return float(v[0])
    if h >= n:
        return float(v[-1])
    if h == int(h):
        i = int(h)
        return float((v[i - 1] + v[i]) / 2.0)
    return float(v[math.ceil(h) - 1])


def _drop(frames: list[pd.DataFrame], ids: pd.Series, reason: str, stage: str) -> None:
    if len(ids):
        frames.append(
            pd.DataFrame({"itinerary_id": ids, "reason": reason, "stage": stage})
        )


def build_directional_trips(
    coupons: pd.DataFrame,
    tickets: pd.DataFrame,
    markets: pd.DataFrame,
    airport_states: pd.DataFrame,
    quarters: tuple[int, ...] | None = None,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Join itineraries and split them into directional trip observations.

    Returns ``(observations, drops)``. A roundtrip itinerary yields two
    observations at half the itinerary fare; a one-way yields one. Interline,
    bulk-fare, non-credible, >3-coupons-per-direction and
    non-contiguous-48 itineraries are dropped with reasons.
    """
    drops: list[pd.DataFrame] = []

    tick = tickets.set_index("itinerary_id")
    cpn = coupons.sort_values(["itinerary_id", "seq"], kind="stable").copy()

    # Tickets with no coupons at all.
    have_coupons = set(cpn["itinerary_id"])
    missing = tick.index[~tick.index.isin(have_coupons)]
    _drop(drops, pd.Series(missing), "itinerary missing coupons", "validate")

    # Coupons with no ticket record.
    cpn = cpn.merge(
        tick[
            ["fare", "roundtrip", "credible", "bulk_fare",
             "coupons_outbound", "coupons_return"]
        ],
        left_on="itinerary_id",
        right_index=True,
        how="left",
        indicator=True,
    )
    orphan = cpn.loc[cpn["_merge"] == "left_only", "itinerary_id"].drop_duplicates()
    _drop(drops, orphan, "no ticket record", "validate")
    cpn = cpn[cpn["_merge"] == "both"].drop(columns="_merge")

    # Itinerary-level validation.
    g = cpn.groupby("itinerary_id", sort=True)
    info = g.agg(
        n=("seq", "size"),
        max_seq=("seq", "max"),
        n_seq=("seq", "nunique"),
        n_tc=("ticketing_carrier", "nunique"),
        n_year=("year", "nunique"),
        n_quarter=("quarter", "nunique"),
        c_out=("coupons_outbound", "first"),
        c_ret=("coupons_return", "first"),
        roundtrip=("roundtrip", "first"),
        credible=("credible", "first"),
        bulk=("bulk_fare", "first"),
    )

    bad_chainseq = info[(info["max_seq"] != info["n"]) | (info["n_seq"] != info["n"])]
    _drop(drops, bad_chainseq.index.to_series(), "non-contiguous coupon sequence", "validate")
    info = info.drop(index=bad_chainseq.index)

    bad_count = info[info["n"] != info["c_out"] + info["c_ret"]]
    _drop(drops, bad_count.index.to_series(), "coupon count mismatch", "validate")
    info = info.drop(index=bad_count.index)

    bad_rt = info[info["roundtrip"] & (info["c_ret"] == 0)]
    _drop(drops, bad_rt.index.to_series(), "roundtrip without return coupons", "validate")
    info = info.drop(index=bad_rt.index)

    bad_period = info[(info["n_year"] > 1) | (info["n_quarter"] > 1)]
    _drop(drops, bad_period.index.to_series(), "inconsistent year-quarter", "validate")
    info = info.drop(index=bad_period.index)

    cpn = cpn[cpn["itinerary_id"].isin(info.index)]
    cpn["direction"] = (cpn["seq"] > cpn["coupons_outbound"]).astype(np.int64)

    # Per-direction chain and passenger consistency.
    dg = cpn.groupby(["itinerary_id", "direction"], sort=True)
    prev_dest = dg["destination"].shift(1)
    chain_break = prev_dest.notna() & (prev_dest != cpn["origin"])
    bad_chain = cpn.loc[chain_break, "itinerary_id"].drop_duplicates()
    _drop(drops, bad_chain, "broken segment chain", "validate")

    pax_var = dg["passengers"].transform("nunique") > 1
    bad_pax = cpn.loc[pax_var, "itinerary_id"].drop_duplicates()
    bad_pax = bad_pax[~bad_pax.isin(bad_chain)]
    _drop(drops, bad_pax, "inconsistent passengers within direction", "validate")

    bad_ids = set(bad_chain) | set(bad_pax)
    cpn = cpn[~cpn["itinerary_id"].isin(bad_ids)]
    info = info.drop(index=[i for i in bad_ids if i in info.index])

    # Market-record endpoints per direction.
    dg = cpn.groupby(["itinerary_id", "direction"], sort=True)
    dirs = dg.agg(
        origin=("origin", "first"),
        destination=("destination", "last"),
        n_seg=("seq", "size"),
        passengers=("passengers", "first"),
        ticketing_carrier=("ticketing_carrier", "first"),
        year=("year", "first"),
        quarter=("quarter", "first"),
        fare=("fare", "first"),
        roundtrip=("roundtrip", "first"),
        credible=("credible", "first"),
        bulk=("bulk_fare", "first"),
        path=("origin", lambda s: ":".join(s)),
        operators=("operating_carrier", lambda s: ":".join(s)),
        distances=("distance", lambda s: ":".join(repr(float(x)) for x in s)),
        total_distance=("distance", "sum"),
    ).reset_index()
    dirs["path"] = dirs["path"] + ":" + dirs["destination"]

    dirs = dirs.merge(
        info["n_tc"].rename("n_ticketing"), left_on="itinerary_id", right_index=True
    )

    mk = markets.rename(columns={"origin": "m_origin", "destination": "m_destination"})
    dirs = dirs.merge(mk, on=["itinerary_id", "direction"], how="left")
    no_market = dirs["m_origin"].isna()
    endpoint_bad = ~no_market & (
        (dirs["origin"] != dirs["m_origin"]) | (dirs["destination"] != dirs["m_destination"])
    )
    _drop(drops, dirs.loc[no_market, "itinerary_id"].drop_duplicates(),
          "missing market record", "validate")
    _drop(drops, dirs.loc[endpoint_bad, "itinerary_id"].drop_duplicates(),
          "market endpoints disagree with coupon chain", "validate")
    bad_ids = set(dirs.loc[no_market | endpoint_bad, "itinerary_id"])
    dirs = dirs[~dirs["itinerary_id"].isin(bad_ids)]

    def drop_itins(mask: pd.Series, reason: str) -> None:
        nonlocal dirs
        ids = dirs.loc[mask, "itinerary_id"].drop_duplicates()
        _drop(drops, ids, reason, "filter")
        dirs = dirs[~dirs["itinerary_id"].isin(set(ids))]

    # Configured quarters (restriction applied before any trimming).
    if quarters is not None:
        drop_itins(~dirs["quarter"].isin(list(quarters)), "outside configured quarters")

    # Contiguous-48 membership for every airport touched.
    contiguous = {
        a for a, s in zip(airport_states["airport"], airport_states["state"])
        if s not in NON_CONTIGUOUS
    }
    touched_ok = dirs["path"].map(
        lambda p: all(a in contiguous for a in p.split(":"))
    )
    drop_itins(~touched_ok, "outside contiguous United States")

    # Coupon-count rule: one to three segments per direction.
    over = dirs.groupby("itinerary_id")["n_seg"].transform("max") > 3
    drop_itins(over, "more than three coupons in a direction")

    # Interline, bulk fares, questioned fares. Interline means the ticketing
    # carrier changes anywhere on the itinerary, coupon level.
    drop_itins(dirs["n_ticketing"] > 1, "interline ticket")
    drop_itins(dirs["bulk"].astype(bool), "bulk fare")
    drop_itins(~dirs["credible"].astype(bool), "fare credibility questioned")

    # Roundtrip split: each direction becomes an observation at half fare.
    dirs["fare"] = np.where(dirs["roundtrip"], dirs["fare"] / 2.0, dirs["fare"])
    dirs["obs_id"] = dirs["itinerary_id"] + ":" + dirs["direction"].astype(str)

    obs = dirs[
        ["obs_id", "itinerary_id", "direction", "ticketing_carrier",
         "origin", "destination", "path", "operators", "distances",
         "n_seg", "total_distance", "passengers", "fare", "year", "quarter"]
    ].rename(columns={"n_seg": "n_segments"}).reset_index(drop=True)

    drops_df = (
        pd.concat(drops, ignore_index=True)
        if drops
        else pd.DataFrame(columns=["itinerary_id", "reason", "stage"])
    )
    return obs, drops_df


def trim_fares(
    obs: pd.DataFrame, cpi: dict[int, float]
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Deflate fares to base-year dollars and apply the tail-trimming rules.

    Drops observations with a real fare under $20, then those outside the
    within-year-quarter [p1, p99] fare window, then those outside the [p1,
    p99] yield (fare per path mile) window. Raises DeflatorError naming any
    year absent from the deflator table.
    """
    missing_years = sorted(set(obs["year"]) - set(cpi))
    if missing_years:
        raise DeflatorError(f"deflator missing for years: {missing_years}")

    out = obs.copy()
    out["fare"] = out["fare"] / out["year"].map(cpi).astype(float)
    drops: list[pd.DataFrame] = []

    def drop_obs(mask: pd.Series, reason: str) -> None:
        nonlocal out
        if mask.any():
            drops.append(
                pd.DataFrame(
                    {
                        "itinerary_id": out.loc[mask, "itinerary_id"],
                        "obs_id": out.loc[mask, "obs_id"],
                        "reason": reason,
                        "stage": "trim",
                    }
                )
            )
            out = out[~mask]

    drop_obs(out["fare"] < 20.0, "fare below $20 floor")

    def percentile_mask(values: pd.Series) -> pd.Series:
        keep = pd.Series(True, index=values.index)
        for _, grp in values.groupby([out["year"], out["quarter"]]):
            lo = nearest_rank_percentile(grp.values, 1)
            hi = nearest_rank_percentile(grp.values, 99)
            keep.loc[grp.index] = (grp >= lo) & (grp <= hi)
        return keep

    drop_obs(~percentile_mask(out["fare"]), "fare outside year-quarter percentile window")
    yields = out["fare"] / out["total_distance"]
    drop_obs(~percentile_mask(yields), "yield outside year-quarter percentile window")

    drops_df = (
        pd.concat(drops, ignore_index=True)
        if drops
        else pd.DataFrame(columns=["itinerary_id", "obs_id", "reason", "stage"])
    )
    return out.reset_index(drop=True), drops_df


def split_path(path: str) -> list[str]:
    return path.split(":")


def split_operators(operators: str) -> list[str]:
    return operators.split(":")


def split_distances(distances: str) -> list[float]:
    return [float(x) for x in distances.split(":")]
