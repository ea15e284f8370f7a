"""Synthetic itinerary, weather and ownership data with known ground truth.

The generating process draws market structure first (presence of carriers in
markets over time), then regional-usage intensities as responses to route
weather, regional network scale and a latent per-cell cost shock (the
endogeneity channel), and finally log prices from the known linear structure
over the realized measures. Two consumption modes share one draw:

* ``generate`` writes CSV bundles conforming to the ingest schemas (plus
  injected trim outliers and filter violations on request);
* ``generate_panel`` skips the file round trip and assembles the estimation
  frame in memory through the same panel/metrics/instruments code paths.

Passenger counts are integers, so both modes yield identical measures up to
float round-off.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import estimation, instruments, metrics, panel
from .errors import GenerationError
from .ingest import CarrierRegistry, DEFAULT_MAJORS

QUARTER = 2
OUTLIER_MARKET = ("X00", "X01")
OUTLIER_CARRIER = "ZZ"
OUTLIER_DISTANCE = 3000.0


@dataclass
class DgpConfig:
    """Knobs of the data-generating process; every draw is seed-reproducible."""

    n_majors: int = 6
    n_regionals: int = 4
    n_airports: int = 24
    n_markets: int = 120
    n_periods: int = 8
    start_year: int = 1998

    beta_csc: float = 0.08
    beta_share: float = -0.21
    beta_mmc: float = 0.023
    gamma_origin: float = 0.2
    gamma_dest: float = 0.2

    endogeneity: float = 0.5       # correlation knob: cost shocks vs usage propensity
    instrument_strength: float = 1.0
    # Two latent cost shocks: a market-period shock common to every carrier in
    # the market (drives the overlap index) and a carrier-cell shock (drives
    # the usage share). Both raise prices and depress regional usage.
    usage_market_load: float = 0.14
    usage_cell_load: float = 0.10
    price_market_load: float = 0.10
    price_cell_load: float = 0.05

    usage_base: float = 0.50
    usage_weather_load: float = 0.12
    usage_regional_load: float = 0.14
    usage_noise: float = 0.08
    price_noise: float = 0.04
    passengers_base: int = 90

    presence_persistence: float = 0.85
    presence_entry: float = 0.30
    missing_weather_rate: float = 0.0

    # Airport climate levels (units as the daily station archive); the
    # defaults put pooled quarterly means near real-world magnitudes and can
    # be recalibrated to match a target table.
    climate_precipitation: float = 27.5
    climate_snowfall: float = 1.5
    climate_snow_depth: float = 5.0
    climate_min_temperature: float = 90.0

    n_trim_outliers: int = 0       # per tail, per year-quarter (0 disables)
    n_violation_fare_floor: int = 0
    n_violation_long_direction: int = 0
    n_violation_interline: int = 0
    n_violation_roundtrip: int = 0

    seed: int = 0

    def validate(self) -> None:
        if self.n_majors < 2:
            raise GenerationError("need at least two majors for pairwise measures")
        if self.n_regionals < 1:
            raise GenerationError("need at least one regional carrier")
        if self.n_airports < 4:
            raise GenerationError("need at least four airports")
        if not 2 <= self.n_markets <= self.n_airports * (self.n_airports - 1):
            raise GenerationError(
                f"n_markets={self.n_markets} infeasible for {self.n_airports} airports"
            )
        if self.n_periods < 2:
            raise GenerationError("need at least two periods for year effects")
        if not -1 < self.endogeneity < 1:
            raise GenerationError("endogeneity must lie in (-1, 1)")
        if self.passengers_base < 10:
            raise GenerationError("passenger base too small for integer shares")


@dataclass
class GroundTruth:
    """True coefficients and per-cell latent state of one draw."""

    config: dict
    betas: dict
    carrier_effects: dict
    market_effects: dict
    year_effects: dict
    cells: pd.DataFrame  # carrier, market, year, quarter, u, realized measures, price


@dataclass
class DrawResult:
    obs: pd.DataFrame
    daily_weather: pd.DataFrame
    stations: pd.DataFrame
    states: pd.DataFrame
    ownership: pd.DataFrame
    cpi: dict
    truth: GroundTruth
    frame: pd.DataFrame  # estimation frame (panel + metrics + instruments)


def _airport_codes(n: int) -> list:
    return [f"A{i:02d}" for i in range(n)]


def _grid_positions(n: int, rng) -> np.ndarray:
    side = math.ceil(math.sqrt(n))
    pos = np.empty((n, 2))
    for i in range(n):
        r, c = divmod(i, side)
        pos[i] = (r * 350.0 + rng.uniform(0, 80), c * 350.0 + rng.uniform(0, 80))
    return pos


def _distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    return np.maximum(d, 200.0)


def _daily_weather(cfg: DgpConfig, rng, airports: list, years: list) -> pd.DataFrame:
    """Ninety Q2 days per airport-year around airport- and year-level climates."""
    rows = []
    n_days = 90
    climates = {
        a: (
            cfg.climate_precipitation + rng.uniform(-12.5, 12.5),    # tenths of mm
            max(cfg.climate_snowfall + rng.uniform(-1.5, 1.5), 0.0),  # mm
            max(cfg.climate_snow_depth + rng.uniform(-5.0, 5.0), 0.0),  # mm
            cfg.climate_min_temperature + rng.uniform(-60, 60),      # tenths of deg C
        )
        for a in airports
    }
    for a in airports:
        p_mu, s_mu, d_mu, t_mu = climates[a]
        for year in years:
            level = (
                p_mu + rng.normal(0, 6),
                max(s_mu + rng.normal(0, 1.0), 0.0),
                max(d_mu + rng.normal(0, 3.0), 0.0),
                t_mu + rng.normal(0, 25),
            )
            days = pd.date_range(f"{year}-04-01", periods=n_days, freq="D")
            p = np.maximum(level[0] + rng.normal(0, 2, n_days), 0.0)
            s = np.maximum(level[1] + rng.normal(0, 0.5, n_days), 0.0)
            dd = np.maximum(level[2] + rng.normal(0, 1.0, n_days), 0.0)
            t = level[3] + rng.normal(0, 8, n_days)
            if cfg.missing_weather_rate > 0:
                for arr in (p, s, dd, t):
                    mask = rng.random(n_days) < cfg.missing_weather_rate
                    arr[mask] = np.nan
            for i, day in enumerate(days):
                rows.append(
                    (f"S_{a}", a, day, p[i], s[i], dd[i], t[i])
                )
    return pd.DataFrame(
        rows,
        columns=["station_id", "airport", "date", "precipitation", "snowfall",
                 "snow_depth", "min_temperature"],
    )


def draw(cfg: DgpConfig) -> DrawResult:
    """Run the full generating process for one seed."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    airports = _airport_codes(cfg.n_airports)
    pos = _grid_positions(cfg.n_airports, rng)
    dist = _distances(pos)
    a_index = {a: i for i, a in enumerate(airports)}
    n_hubs = max(2, cfg.n_airports // 6)
    hubs = airports[:n_hubs]
    majors = [f"M{j}" for j in range(cfg.n_majors)]
    hub_of = {j: hubs[idx % n_hubs] for idx, j in enumerate(majors)}
    regionals = [f"R{k}" for k in range(cfg.n_regionals)]
    regional_scale = {k: rng.uniform(0.6, 1.6) for k in regionals}
    pools = {
        j: [regionals[idx % cfg.n_regionals], regionals[(idx + 1) % cfg.n_regionals]]
        for idx, j in enumerate(majors)
    }

    all_pairs = [(o, d) for o in airports for d in airports if o != d]
    pick = rng.choice(len(all_pairs), size=cfg.n_markets, replace=False)
    market_pairs = [all_pairs[i] for i in sorted(pick)]
    years = [cfg.start_year + t for t in range(cfg.n_periods)]

    weather = _daily_weather(cfg, rng, airports + list(OUTLIER_MARKET), years)

    # Presence: persistent carrier-market service with entry/exit over time.
    omega = rng.uniform(0.4, 0.85, cfg.n_majors)
    size_m = rng.normal(0, 1, cfg.n_markets)
    base_p = np.clip(
        0.30 + 0.5 * omega[:, None] + 0.10 * size_m[None, :]
        + rng.normal(0, 0.15, (cfg.n_majors, cfg.n_markets)),
        0.03, 0.97,
    )
    presence = np.zeros((cfg.n_majors, cfg.n_markets, cfg.n_periods), dtype=bool)
    presence[:, :, 0] = rng.random((cfg.n_majors, cfg.n_markets)) < base_p
    for t in range(1, cfg.n_periods):
        stay = rng.random((cfg.n_majors, cfg.n_markets)) < cfg.presence_persistence
        enter = rng.random((cfg.n_majors, cfg.n_markets)) < cfg.presence_entry * base_p
        presence[:, :, t] = np.where(presence[:, :, t - 1], stay, enter)
    anchor = int(np.argmax(omega))
    for m in range(cfg.n_markets):
        for t in range(cfg.n_periods):
            if not presence[:, m, t].any():
                presence[anchor, m, t] = True

    # Quarterly averages and per-cell route extremes feed the usage index.
    joined = weather[["airport", "date", "precipitation", "snowfall",
                      "snow_depth", "min_temperature"]]
    qweather = instruments.quarterly_weather(joined)
    qw_map = {
        (r["airport"], r["year"]): (
            r["avg_precipitation"], r["avg_snowfall"],
            r["avg_snow_depth"], r["avg_min_temperature"],
        )
        for _, r in qweather.iterrows()
    }

    def path_of(j: str, o: str, d: str) -> list:
        hub = hub_of[j]
        return [o, d] if hub in (o, d) else [o, hub, d]

    def route_extremes(path: list, year: int):
        vals = [qw_map.get((a, year), (np.nan,) * 4) for a in path]
        arr = np.array(vals, dtype=float)
        with np.errstate(all="ignore"):
            p = np.nanmax(arr[:, 0])
            s = np.nanmax(arr[:, 1])
            dd = np.nanmax(arr[:, 2])
            t = np.nanmin(arr[:, 3])
        return p, s, dd, t

    cells = []
    for t, year in enumerate(years):
        for m, (o, d) in enumerate(market_pairs):
            for jdx, j in enumerate(majors):
                if presence[jdx, m, t]:
                    path = path_of(j, o, d)
                    ext = route_extremes(path, year)
                    cells.append((j, jdx, m, o, d, year, path, ext))
    cell_df = pd.DataFrame(
        cells, columns=["carrier", "jdx", "midx", "origin", "destination",
                        "year", "path", "extremes"],
    )
    ext = np.vstack(cell_df["extremes"].to_numpy())
    with np.errstate(all="ignore"):
        mu = np.nanmean(ext, axis=0)
        sd = np.nanstd(ext, axis=0)
    sd[sd == 0] = 1.0
    z = (ext - mu) / sd
    z = np.nan_to_num(z, nan=0.0)
    wx_index = (z[:, 0] + z[:, 1] + z[:, 2] - z[:, 3]) / 2.0

    n_cells = len(cell_df)
    u_market_mat = rng.normal(0, 1, (cfg.n_markets, cfg.n_periods))
    year_idx = {y: t for t, y in enumerate(years)}
    u_market = np.array(
        [u_market_mat[m, year_idx[y]] for m, y in zip(cell_df["midx"], cell_df["year"])]
    )
    u_cell = rng.normal(0, 1, n_cells)
    eta = rng.normal(0, 1, n_cells)
    eps = rng.normal(0, 1, n_cells)
    passengers = np.maximum(
        np.round(cfg.passengers_base * np.exp(0.25 * rng.normal(0, 1, n_cells))), 10
    ).astype(np.int64)

    chosen = [pools[j][m % 2] for j, m in zip(cell_df["carrier"], cell_df["midx"])]
    scale_z = np.array([regional_scale[k] - 1.1 for k in chosen])
    s_iv = cfg.instrument_strength
    f_star = np.clip(
        cfg.usage_base
        + s_iv * cfg.usage_weather_load * wx_index
        + s_iv * cfg.usage_regional_load * scale_z
        - cfg.endogeneity * (cfg.usage_market_load * u_market + cfg.usage_cell_load * u_cell)
        + cfg.usage_noise * eta,
        0.02, 0.98,
    )
    x_regional = np.round(passengers * f_star).astype(np.int64)
    x_self = passengers - x_regional

    # Trip observations: up to two variants per cell (regional/self operated).
    obs_rows = []
    for i in range(n_cells):
        j = cell_df["carrier"].iloc[i]
        o, d, year = cell_df["origin"].iloc[i], cell_df["destination"].iloc[i], int(cell_df["year"].iloc[i])
        path = cell_df["path"].iloc[i]
        k = chosen[i]
        dists = [dist[a_index[a], a_index[b]] for a, b in zip(path[:-1], path[1:])]
        for variant, pax, ops in (
            ("R", int(x_regional[i]), [k] * len(dists)),
            ("S", int(x_self[i]), [j] * len(dists)),
        ):
            if pax <= 0:
                continue
            obs_rows.append(
                {
                    "obs_id": f"{j}.{o}{d}.{year}.{variant}:0",
                    "itinerary_id": f"{j}.{o}{d}.{year}.{variant}",
                    "direction": 0,
                    "ticketing_carrier": j,
                    "origin": o,
                    "destination": d,
                    "path": ":".join(path),
                    "operators": ":".join(ops),
                    "distances": ":".join(repr(float(x)) for x in dists),
                    "n_segments": len(dists),
                    "total_distance": float(sum(dists)),
                    "passengers": pax,
                    "fare": 100.0,
                    "year": year,
                    "quarter": QUARTER,
                }
            )
    obs = pd.DataFrame(obs_rows)

    registry = synthetic_registry(regionals)
    pnl = panel.aggregate_panel(obs, registry)
    shares = panel.usage_shares(obs, registry)
    mets = metrics.market_metrics(pnl, shares)
    ivs, _, _ = instruments.build_instruments(obs, pnl, qweather, registry)
    frame = estimation.assemble_estimation_frame(pnl, mets, ivs)

    # Price equation over the realized measures; market effects carry a
    # distance elasticity so yields stay inside the trim windows.
    fe_carrier = {j: rng.normal(0, 0.12) for j in majors}
    log_mdist = {}
    for m, (o, d) in enumerate(market_pairs):
        log_mdist[f"{o}-{d}"] = math.log(dist[a_index[o], a_index[d]])
    mean_ld = float(np.mean(list(log_mdist.values())))
    fe_market = {
        mk: 0.4 * (ld - mean_ld) + rng.normal(0, 0.10) for mk, ld in log_mdist.items()
    }
    fe_year = {y: 0.015 * (y - years[0]) + rng.normal(0, 0.04) for y in years}

    key = ["carrier", "market", "year"]
    cell_df["market"] = cell_df["origin"] + "-" + cell_df["destination"]
    cell_df["u_market"] = u_market
    cell_df["u_cell"] = u_cell
    cell_df["eps"] = eps
    fr = frame.merge(
        cell_df[key + ["u_market", "u_cell", "eps"]],
        on=key, how="left", validate="one_to_one",
    )
    log_price = (
        math.log(230.0)
        + fr["carrier"].map(fe_carrier).to_numpy()
        + fr["market"].map(fe_market).to_numpy()
        + fr["year"].map(fe_year).to_numpy()
        + cfg.beta_csc * fr["csc_baseline"].to_numpy()
        + cfg.beta_share * fr["regional_share"].to_numpy()
        + cfg.beta_mmc * fr["mmc"].fillna(0.0).to_numpy()
        + cfg.gamma_origin * fr["network_origin"].to_numpy()
        + cfg.gamma_dest * fr["network_destination"].to_numpy()
        + cfg.price_market_load * fr["u_market"].to_numpy()
        + cfg.price_cell_load * fr["u_cell"].to_numpy()
        + cfg.price_noise * fr["eps"].to_numpy()
    )
    price = np.exp(log_price)
    price_of = dict(zip(zip(fr["carrier"], fr["market"], fr["year"]), price))
    frame["price"] = price
    frame["log_price"] = np.log(price)
    obs["fare"] = [
        price_of[(c, f"{o}-{d}", y)]
        for c, o, d, y in zip(obs["ticketing_carrier"], obs["origin"],
                              obs["destination"], obs["year"])
    ]

    truth_cells = fr[key + ["quarter", "u_market", "u_cell", "csc_baseline",
                            "regional_share", "mmc", "network_origin",
                            "network_destination"]].copy()
    truth_cells["price"] = price
    truth = GroundTruth(
        config=asdict(cfg),
        betas={
            "beta_csc": cfg.beta_csc, "beta_share": cfg.beta_share,
            "beta_mmc": cfg.beta_mmc, "gamma_origin": cfg.gamma_origin,
            "gamma_dest": cfg.gamma_dest,
        },
        carrier_effects=fe_carrier,
        market_effects=fe_market,
        year_effects={str(y): v for y, v in fe_year.items()},
        cells=truth_cells,
    )

    stations = pd.DataFrame(
        {
            "airport": airports + list(OUTLIER_MARKET),
            "station_id": [f"S_{a}" for a in airports + list(OUTLIER_MARKET)],
        }
    )
    states = pd.DataFrame(
        {
            "airport": airports + list(OUTLIER_MARKET),
            "state": "TX",
        }
    )
    ownership = pd.DataFrame(
        [
            {
                "code": k, "carrier_name": f"Regional {k}",
                "parent": f"{k} Holdings", "parent_major": "",
                "start_year": 1900, "end_year": 9999,
            }
            for k in regionals
        ]
    )
    cpi = {int(y): 1.0 for y in years}
    return DrawResult(
        obs=obs, daily_weather=weather, stations=stations, states=states,
        ownership=ownership, cpi=cpi, truth=truth, frame=frame,
    )


def synthetic_registry(regionals: list) -> CarrierRegistry:
    records = pd.DataFrame(
        {
            "code": regionals,
            "carrier_name": [f"Regional {k}" for k in regionals],
            "parent": [f"{k} Holdings" for k in regionals],
            "parent_major": "",
            "start_year": 1900,
            "end_year": 9999,
        }
    )
    return CarrierRegistry(records=records, majors=DEFAULT_MAJORS, unknown_policy="reject")


def generate_panel(cfg: DgpConfig) -> tuple[pd.DataFrame, GroundTruth]:
    """Estimation frame and ground truth without the file round trip."""
    result = draw(cfg)
    return result.frame, result.truth


def _obs_to_itineraries(obs: pd.DataFrame):
    coupons, tickets, markets = [], [], []
    for _, r in obs.iterrows():
        path = r["path"].split(":")
        ops = r["operators"].split(":")
        dists = r["distances"].split(":")
        itin = r["itinerary_id"]
        for s, (a, b, op, dd) in enumerate(zip(path[:-1], path[1:], ops, dists), start=1):
            coupons.append(
                (itin, s, r["ticketing_carrier"], op, a, b, r["passengers"],
                 dd, r["year"], r["quarter"])
            )
        tickets.append(
            (itin, repr(float(r["fare"])), "false", "true", "false", len(ops), 0)
        )
        markets.append((itin, 0, r["origin"], r["destination"]))
    return coupons, tickets, markets


def _inject_extras(cfg: DgpConfig, rng, years, market_pairs, coupons, tickets, markets):
    """Trim outliers in a dedicated market plus requested filter violations."""
    xo, xd = OUTLIER_MARKET
    dstr = repr(OUTLIER_DISTANCE)
    for year in years:
        for tail, lo, hi in (("L", 20.05, 20.6), ("H", 8000.0, 12000.0)):
            for i in range(cfg.n_trim_outliers):
                itin = f"OUT.{tail}{i}.{year}"
                fare = rng.uniform(lo, hi)
                coupons.append((itin, 1, OUTLIER_CARRIER, OUTLIER_CARRIER, xo, xd,
                                1, dstr, year, QUARTER))
                tickets.append((itin, repr(float(fare)), "false", "true", "false", 1, 0))
                markets.append((itin, 0, xo, xd))

    o, d = market_pairs[0]
    mid = market_pairs[1][0] if market_pairs[1][0] not in (o, d) else market_pairs[1][1]
    year = years[0]
    for i in range(cfg.n_violation_fare_floor):
        itin = f"VIOL.FARE.{i}"
        coupons.append((itin, 1, "M0", "M0", o, d, 1, "500.0", year, QUARTER))
        tickets.append((itin, "15.0", "false", "true", "false", 1, 0))
        markets.append((itin, 0, o, d))
    for i in range(cfg.n_violation_long_direction):
        itin = f"VIOL.LONG.{i}"
        chain = [o, mid, xo, xd, d]
        for s, (a, b) in enumerate(zip(chain[:-1], chain[1:]), start=1):
            coupons.append((itin, s, "M0", "M0", a, b, 1, "400.0", year, QUARTER))
        tickets.append((itin, "400.0", "false", "true", "false", 4, 0))
        markets.append((itin, 0, o, d))
    for i in range(cfg.n_violation_interline):
        itin = f"VIOL.INTER.{i}"
        coupons.append((itin, 1, "M0", "M0", o, mid, 1, "300.0", year, QUARTER))
        coupons.append((itin, 2, "M1", "M1", mid, d, 1, "300.0", year, QUARTER))
        tickets.append((itin, "250.0", "false", "true", "false", 2, 0))
        markets.append((itin, 0, o, d))
    for i in range(cfg.n_violation_roundtrip):
        itin = f"RT.{i}"
        coupons.append((itin, 1, "M0", "M0", o, d, 2, "500.0", year, QUARTER))
        coupons.append((itin, 2, "M0", "M0", d, o, 2, "500.0", year, QUARTER))
        tickets.append((itin, "300.0", "true", "true", "false", 1, 1))
        markets.append((itin, 0, o, d))
        markets.append((itin, 1, d, o))


def generate(cfg: DgpConfig, outdir: str | Path) -> GroundTruth:
    """Write a complete input bundle conforming to the ingest schemas."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    result = draw(cfg)
    # Injection randomness comes from a stream disjoint from the draw's.
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(999,)))

    coupons, tickets, markets = _obs_to_itineraries(result.obs)
    years = sorted(result.obs["year"].unique().tolist())
    pair_list = list(dict.fromkeys(zip(result.obs["origin"], result.obs["destination"])))
    _inject_extras(cfg, rng, years, pair_list, coupons, tickets, markets)

    pd.DataFrame(
        coupons,
        columns=["itinerary_id", "seq", "ticketing_carrier", "operating_carrier",
                 "origin", "destination", "passengers", "distance", "year", "quarter"],
    ).to_csv(outdir / "coupons.csv", index=False, lineterminator="\n")
    pd.DataFrame(
        tickets,
        columns=["itinerary_id", "fare", "roundtrip", "credible", "bulk_fare",
                 "coupons_outbound", "coupons_return"],
    ).to_csv(outdir / "tickets.csv", index=False, lineterminator="\n")
    pd.DataFrame(
        markets, columns=["itinerary_id", "direction", "origin", "destination"]
    ).to_csv(outdir / "markets.csv", index=False, lineterminator="\n")

    wx = result.daily_weather.copy()
    wx["date"] = wx["date"].dt.strftime("%Y-%m-%d")
    wx[["station_id", "date", "precipitation", "snowfall", "snow_depth",
        "min_temperature"]].to_csv(outdir / "weather.csv", index=False, lineterminator="\n")
    result.stations.to_csv(outdir / "airport_stations.csv", index=False, lineterminator="\n")
    result.states.to_csv(outdir / "airport_states.csv", index=False, lineterminator="\n")
    result.ownership.to_csv(outdir / "ownership.csv", index=False, lineterminator="\n")
    pd.DataFrame(
        {"year": sorted(result.cpi), "deflator": [result.cpi[y] for y in sorted(result.cpi)]}
    ).to_csv(outdir / "cpi.csv", index=False, lineterminator="\n")

    truth = result.truth
    truth.cells.to_csv(outdir / "ground_truth_cells.csv", index=False, lineterminator="\n")
    with open(outdir / "ground_truth.json", "w") as fh:
        json.dump(
            {
                "config": truth.config,
                "betas": truth.betas,
                "carrier_effects": truth.carrier_effects,
                "market_effects": truth.market_effects,
                "year_effects": truth.year_effects,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return truth
