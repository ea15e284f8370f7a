"""Market-period structure measures.

Three subcontracting-overlap indices (baseline, count, weighted), multimarket
contact, and a concentration index over regional carriers, each defined per
(market, year, quarter). The scalar functions document the formulas on small
inputs; `market_metrics` is the vectorized pipeline driver and must produce
identical values.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd

METRIC_COLUMNS = [
    "market", "year", "quarter", "n_majors", "n_regionals",
    "csc_baseline", "csc_count", "csc_weighted",
    "mmc_raw", "mmc", "regional_hhi",
]

PERIOD = ["year", "quarter"]


def csc_baseline(
    shares: Mapping[tuple[str, str], float],
    links: set[tuple[str, str]],
    majors: Sequence[str],
) -> float:
    """Average overlap of regional usage across ordered major pairs.

    ``shares`` maps (regional, major) to the major's passenger share carried
    by that regional in the market; ``links`` holds (major, regional) pairs
    with usage anywhere in the period (the market itself included); ``majors``
    are the carriers present in the market. Zero when fewer than two majors
    are present or no regional is used.
    """
    n = len(majors)
    active = sorted({k for (k, j), s in shares.items() if s > 0})
    if n < 2 or not active:
        return 0.0
    total = 0.0
    for i in majors:
        for j in majors:
            if i == j:
                continue
            for k in active:
                if (i, k) in links:
                    total += shares.get((k, j), 0.0)
    return total / (n * (n - 1) * len(active))


def csc_count(
    shares: Mapping[tuple[str, str], float],
    links: set[tuple[str, str]],
    majors: Sequence[str],
) -> float:
    """Fraction of ordered major pairs with overlapping regional usage."""
    n = len(majors)
    if n < 2:
        return 0.0
    overlapping = 0
    for i in majors:
        for j in majors:
            if i == j:
                continue
            if any(
                shares.get((k, j), 0.0) > 0 and (i, k) in links
                for (k, jj) in shares
                if jj == j
            ):
                overlapping += 1
    return overlapping / (n * (n - 1))


def csc_weighted(
    shares: Mapping[tuple[str, str], float],
    links: set[tuple[str, str]],
    majors: Sequence[str],
    market_shares: Mapping[str, float],
) -> float:
    """Overlapped usage shares weighted by the majors' passenger shares."""
    n = len(majors)
    active = {k for (k, j), s in shares.items() if s > 0}
    if n < 2 or not active:
        return 0.0
    total = 0.0
    for j in majors:
        overlapped = 0.0
        for k in active:
            s = shares.get((k, j), 0.0)
            if s > 0 and any((i, k) in links for i in majors if i != j):
                overlapped += s
        total += market_shares.get(j, 0.0) * overlapped
    return total / n


def mmc(
    contacts: Mapping[frozenset, int],
    majors: Sequence[str],
) -> float:
    """Average pairwise contact of the majors in a market, in thousands.

    ``contacts`` maps unordered major pairs to the number of markets both
    serve in the period. Undefined (NaN) for fewer than two majors.
    """
    n = len(majors)
    if n < 2:
        return float("nan")
    total = 0
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            total += contacts.get(frozenset((majors[a], majors[b])), 0)
    return total / (n * (n - 1)) / 1000.0


def regional_hhi(passengers: Mapping[str, float]) -> float:
    """Sum of squared passenger shares over regionals active in a market."""
    total = float(sum(passengers.values()))
    if total <= 0:
        return float("nan")
    return sum((p / total) ** 2 for p in passengers.values())


def subcontract_links(shares: pd.DataFrame) -> pd.DataFrame:
    """(major, regional) pairs with positive usage anywhere in each period."""
    pos = shares[shares["share"] > 0]
    return pos[PERIOD + ["major", "regional"]].drop_duplicates().reset_index(drop=True)


def pair_contacts(panel: pd.DataFrame) -> pd.DataFrame:
    """Markets jointly served by each ordered carrier pair, per period."""
    rows = []
    presence = panel[["carrier", "market"] + PERIOD].drop_duplicates()
    for (y, q), grp in presence.groupby(PERIOD, sort=True):
        mat = pd.crosstab(grp["market"], grp["carrier"]).astype(np.int64)
        carriers = list(mat.columns)
        co = mat.T.values @ mat.values
        for a, ca in enumerate(carriers):
            for b, cb in enumerate(carriers):
                if a != b and co[a, b] > 0:
                    rows.append((y, q, ca, cb, int(co[a, b])))
    return pd.DataFrame(rows, columns=PERIOD + ["carrier_i", "carrier_j", "contacts"])


def market_metrics(panel: pd.DataFrame, shares: pd.DataFrame) -> pd.DataFrame:
    """All market-period measures, vectorized over the whole panel.

    ``mmc`` is the raw average contact divided by 1,000 (the scale used in
    regressions); ``mmc_raw`` keeps the unscaled average. Single-major
    market-periods get zero overlap indices and missing contact; markets with
    no active regional get a missing concentration index.
    """
    if len(panel) == 0:
        return pd.DataFrame(columns=METRIC_COLUMNS)
    key = ["market"] + PERIOD

    presence = panel[["carrier", "market"] + PERIOD].drop_duplicates()
    base = presence.groupby(key, sort=True).size().rename("n_majors").reset_index()

    pos = shares[shares["share"] > 0][
        key + ["major", "regional", "share", "passengers"]
    ].copy()
    links = pos[PERIOD + ["major", "regional"]].drop_duplicates()

    # Majors present in the market and linked to each active regional.
    linked_present = presence.rename(columns={"carrier": "major"}).merge(
        links, on=PERIOD + ["major"]
    )
    active = pos[key + ["regional"]].drop_duplicates()
    lp = linked_present.merge(active, on=key + ["regional"])
    c_k = lp.groupby(key + ["regional"], sort=False).size().rename("n_linked")

    n_regionals = active.groupby(key, sort=False).size().rename("n_regionals")
    base = base.merge(n_regionals.reset_index(), on=key, how="left")
    base["n_regionals"] = base["n_regionals"].fillna(0).astype(np.int64)

    # Baseline index: every positive share row contributes share times the
    # number of *other* present majors linked to the regional.
    pos = pos.merge(c_k.reset_index(), on=key + ["regional"], how="left")
    pos["term"] = pos["share"] * (pos["n_linked"] - 1)
    num = pos.groupby(key, sort=False)["term"].sum().rename("csc_num")
    base = base.merge(num.reset_index(), on=key, how="left")
    denom = base["n_majors"] * (base["n_majors"] - 1) * base["n_regionals"]
    base["csc_baseline"] = np.where(
        (base["n_majors"] >= 2) & (base["n_regionals"] >= 1),
        base["csc_num"].astype(float).fillna(0.0) / denom.replace(0, np.nan),
        0.0,
    )
    base["csc_baseline"] = base["csc_baseline"].fillna(0.0)

    # Count index: distinct ordered pairs (linked competitor, user).
    pairs = pos[key + ["major", "regional"]].merge(
        lp.rename(columns={"major": "competitor"}), on=key + ["regional"]
    )
    pairs = pairs[pairs["competitor"] != pairs["major"]]
    pairs = pairs[key + ["major", "competitor"]].drop_duplicates()
    n_overlap = pairs.groupby(key, sort=False).size().rename("n_overlap")
    base = base.merge(n_overlap.reset_index(), on=key, how="left")
    base["csc_count"] = np.where(
        base["n_majors"] >= 2,
        base["n_overlap"].astype(float).fillna(0.0)
        / (base["n_majors"] * (base["n_majors"] - 1)).replace(0, np.nan),
        0.0,
    )
    base["csc_count"] = base["csc_count"].fillna(0.0)

    # Weighted index: overlapped usage share times the major's market share.
    traffic = panel.groupby(key + ["carrier"], sort=False)["traffic"].sum()
    tot = traffic.groupby(level=key).transform("sum")
    mshare = (traffic / tot).rename("market_share").reset_index().rename(
        columns={"carrier": "major"}
    )
    pos["overlapped"] = pos["share"].where(pos["n_linked"] >= 2, 0.0)
    overl = pos.groupby(key + ["major"], sort=False)["overlapped"].sum().reset_index()
    overl = overl.merge(mshare, on=key + ["major"])
    overl["w"] = overl["overlapped"] * overl["market_share"]
    wsum = overl.groupby(key, sort=False)["w"].sum().rename("w_sum")
    base = base.merge(wsum.reset_index(), on=key, how="left")
    base["csc_weighted"] = np.where(
        base["n_majors"] >= 2,
        base["w_sum"].astype(float).fillna(0.0) / base["n_majors"],
        0.0,
    )

    # Multimarket contact via the period co-presence matrix.
    mmc_parts = []
    for (y, q), grp in presence.groupby(PERIOD, sort=True):
        mat = pd.crosstab(grp["market"], grp["carrier"])
        p = mat.values.astype(np.float64)
        co = p.T @ p
        a = p @ co
        total = (p * a).sum(axis=1) - p @ np.diag(co)
        n = p.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            raw = np.where(n >= 2, total / (n * (n - 1)), np.nan)
        mmc_parts.append(
            pd.DataFrame(
                {"market": mat.index, "year": y, "quarter": q, "mmc_raw": raw}
            )
        )
    base = base.merge(pd.concat(mmc_parts, ignore_index=True), on=key, how="left")
    base["mmc"] = base["mmc_raw"] / 1000.0

    # Concentration over regionals active in the market.
    pax = pos.groupby(key + ["regional"], sort=False)["passengers"].sum()
    pax_tot = pax.groupby(level=key).transform("sum")
    hhi = ((pax / pax_tot) ** 2).groupby(level=key).sum().rename("regional_hhi")
    base = base.merge(hhi.reset_index(), on=key, how="left")

    out = base[METRIC_COLUMNS].sort_values(key, kind="stable").reset_index(drop=True)
    for col in ("csc_baseline", "csc_count", "csc_weighted", "mmc_raw", "mmc", "regional_hhi"):
        out[col] = out[col].astype(float)
    return out


def summary_stats(panel: pd.DataFrame, metrics: pd.DataFrame) -> pd.DataFrame:
    """Mean/median/sd table, each variable at its own observation level."""
    rows = []

    def add(name: str, level: str, values: pd.Series) -> None:
        v = values.dropna()
        rows.append(
            {
                "variable": name,
                "level": level,
                "mean": v.mean() if len(v) else np.nan,
                "median": v.median() if len(v) else np.nan,
                "sd": v.std(ddof=1) if len(v) > 1 else np.nan,
                "n": len(v),
            }
        )

    for col in ("csc_baseline", "csc_count", "csc_weighted", "mmc", "regional_hhi"):
        add(col, "market", metrics[col])
    add("regional_share", "carrier-market", panel["regional_share"])
    add("price", "carrier-market", panel["price"])
    add("log_price", "carrier-market", np.log(panel["price"]))
    add("traffic", "carrier-market", panel["traffic"])
    add("network_origin", "carrier-market", panel["network_origin"])
    add("network_destination", "carrier-market", panel["network_destination"])
    return pd.DataFrame(rows)


def yearly_quantiles(metrics: pd.DataFrame, column: str) -> pd.DataFrame:
    """Per-year box-plot data (quartiles, whiskers at 1.5 IQR, mean)."""
    rows = []
    for year, grp in metrics.groupby("year", sort=True):
        v = grp[column].dropna().to_numpy()
        if len(v) == 0:
            continue
        q1, q2, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        lo = float(v[v >= q1 - 1.5 * iqr].min())
        hi = float(v[v <= q3 + 1.5 * iqr].max())
        rows.append(
            {
                "variable": column, "year": year,
                "q25": q1, "median": q2, "q75": q3,
                "whisker_lo": lo, "whisker_hi": hi, "mean": float(v.mean()),
                "n": len(v),
            }
        )
    return pd.DataFrame(rows)
