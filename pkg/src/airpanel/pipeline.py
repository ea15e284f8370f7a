"""Stage orchestration: checkpoint CSVs, reject reports, hash manifest.

Each stage consumes the previous stage's checkpoint files so stages can run
(and be tested) independently. Outputs are written to ``<name>.partial`` and
renamed on stage success; a failing stage leaves its partials in place and
propagates a StageError naming the stage. The run manifest records input and
output hashes plus row counts, so reruns on identical inputs are verifiable
byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from . import estimation, ingest, instruments, metrics, panel, report, sample, synth
from .config import RunConfig
from .errors import StageError

log = logging.getLogger("airpanel")

STAGES = ("ingest", "build-sample", "panel", "metrics", "instruments", "estimate", "report")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class StageWriter:
    """Collects a stage's outputs; publishes them atomically on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.pending: list[tuple[Path, Path]] = []
        self.rows: dict[str, int] = {}

    def write(self, df: pd.DataFrame, name: str) -> Path:
        final = self.out_dir / name
        partial = self.out_dir / (name + ".partial")
        df.to_csv(partial, index=False, lineterminator="\n")
        self.pending.append((partial, final))
        self.rows[name] = len(df)
        return final

    def write_text(self, text: str, name: str) -> Path:
        final = self.out_dir / name
        partial = self.out_dir / (name + ".partial")
        partial.write_text(text)
        self.pending.append((partial, final))
        return final

    def publish(self) -> dict:
        hashes = {}
        for partial, final in self.pending:
            partial.replace(final)
            hashes[final.name] = _sha256(final)
        self.pending.clear()
        return hashes


def _input_hashes(paths: dict) -> dict:
    return {str(name): _sha256(Path(p)) for name, p in sorted(paths.items()) if Path(p).exists()}


def run_stage(name: str, cfg: RunConfig, manifest: list):
    """Dispatch one stage, recording its manifest entry."""
    handler = {
        "ingest": stage_ingest,
        "build-sample": stage_build_sample,
        "panel": stage_panel,
        "metrics": stage_metrics,
        "instruments": stage_instruments,
        "estimate": stage_estimate,
        "report": stage_report,
    }[name]
    try:
        entry = handler(cfg)
    except Exception as exc:
        raise StageError(name, exc) from exc
    entry["stage"] = name
    manifest.append(entry)
    log.info("stage %s complete: %s", name, entry.get("rows", {}))
    return entry


def stage_ingest(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    inputs = {
        name: cfg.input_path(name)
        for name in ("coupons", "tickets", "markets", "ownership", "weather",
                     "airport_stations", "airport_states", "cpi")
    }
    for name in ("coupons", "tickets", "markets", "ownership"):
        if not Path(inputs[name]).exists():
            raise ingest.MissingInputError(f"inputs.{name}: file not found: {inputs[name]}")

    parsed = {
        "coupons": ingest.parse_coupons(inputs["coupons"]),
        "tickets": ingest.parse_tickets(inputs["tickets"]),
        "markets": ingest.parse_markets(inputs["markets"]),
        "ownership": ingest.parse_ownership(inputs["ownership"]),
    }
    # Weather feeds only the instruments stage; a run without it can still
    # build the sample, panel and metrics. The instruments stage aborts then.
    have_weather = Path(inputs["weather"]).exists() and Path(inputs["airport_stations"]).exists()
    if have_weather:
        parsed["weather"] = ingest.parse_weather(inputs["weather"])
        parsed["airport_stations"] = ingest.parse_airport_stations(inputs["airport_stations"])
    else:
        log.warning("weather inputs missing; instruments stage will abort if run")
    for name, result in parsed.items():
        out.write(result.records, f"{name}.parsed.csv")
        stem = Path(inputs[name]).stem
        out.write(result.rejects, f"{stem}.rejects.csv")

    if have_weather:
        weather = parsed["weather"].records
        stations = parsed["airport_stations"].records
        joined, coverage = ingest.load_weather(weather, stations)
        joined = joined.copy()
        joined["date"] = joined["date"].dt.strftime("%Y-%m-%d")
        out.write(joined, "weather.joined.csv")
        out.write(coverage, "weather_coverage.csv")

    states = ingest.parse_airport_states(inputs["airport_states"])
    out.write(states, "airport_states.parsed.csv")
    cpi = ingest.parse_cpi(inputs["cpi"])
    out.write(pd.DataFrame({"year": sorted(cpi), "deflator": [cpi[y] for y in sorted(cpi)]}),
              "cpi.parsed.csv")
    return {"inputs": _input_hashes(inputs), "outputs": out.publish(), "rows": out.rows}


def _read(cfg: RunConfig, name: str) -> pd.DataFrame:
    path = cfg.out_dir / name
    if not path.exists():
        raise ingest.MissingInputError(f"checkpoint not found (run earlier stages): {path}")
    return pd.read_csv(path)


def _registry(cfg: RunConfig) -> ingest.CarrierRegistry:
    records = _read(cfg, "ownership.parsed.csv")
    records["parent_major"] = records["parent_major"].fillna("")
    records["parent"] = records["parent"].fillna("")
    return ingest.CarrierRegistry(records=records, unknown_policy=cfg.unknown_carriers)


def stage_build_sample(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    coupons = _read(cfg, "coupons.parsed.csv")
    tickets = _read(cfg, "tickets.parsed.csv")
    markets = _read(cfg, "markets.parsed.csv")
    states = _read(cfg, "airport_states.parsed.csv")
    cpi_df = _read(cfg, "cpi.parsed.csv")
    cpi = dict(zip(cpi_df["year"], cpi_df["deflator"]))
    obs, drops = sample.build_directional_trips(
        coupons, tickets, markets, states, quarters=cfg.quarters
    )
    obs, trim_drops = sample.trim_fares(obs, cpi)
    out.write(obs, "sample.csv")
    all_drops = pd.concat(
        [drops.assign(obs_id=""), trim_drops], ignore_index=True
    )[["itinerary_id", "obs_id", "reason", "stage"]]
    out.write(all_drops, "sample_drops.csv")
    return {"inputs": {}, "outputs": out.publish(), "rows": out.rows}


def stage_panel(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    obs = _read(cfg, "sample.csv")
    registry = _registry(cfg)
    out.write(panel.aggregate_panel(obs, registry), "panel.csv")
    out.write(panel.usage_shares(obs, registry), "usage_shares.csv")
    return {"inputs": {}, "outputs": out.publish(), "rows": out.rows}


def stage_metrics(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    pnl = _read(cfg, "panel.csv")
    shares = _read(cfg, "usage_shares.csv")
    mets = metrics.market_metrics(pnl, shares)
    out.write(mets, "metrics.csv")
    out.write(metrics.summary_stats(pnl, mets), "summary_stats.csv")
    quantiles = pd.concat(
        [metrics.yearly_quantiles(mets, "csc_baseline"),
         metrics.yearly_quantiles(mets, "mmc")],
        ignore_index=True,
    )
    out.write(quantiles, "metrics_yearly_quantiles.csv")
    return {"inputs": {}, "outputs": out.publish(), "rows": out.rows}


def stage_instruments(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    obs = _read(cfg, "sample.csv")
    pnl = _read(cfg, "panel.csv")
    if not (cfg.out_dir / "weather.joined.csv").exists():
        raise ingest.MissingInputError(
            "weather checkpoint missing: provide inputs.weather and "
            "inputs.airport_stations, then rerun ingest"
        )
    weather = _read(cfg, "weather.joined.csv")
    weather["date"] = pd.to_datetime(weather["date"])
    registry = _registry(cfg)
    qweather = instruments.quarterly_weather(weather)
    ivs, net_raw, missing_report = instruments.build_instruments(
        obs, pnl, qweather, registry, regional_aggregate=cfg.regional_iv_aggregate
    )
    out.write(qweather, "quarterly_weather.csv")
    out.write(ivs, "instruments.csv")
    out.write(net_raw, "instruments_network_raw.csv")
    out.write(missing_report, "instruments_report.csv")
    return {"inputs": {}, "outputs": out.publish(), "rows": out.rows}


def _bin_iqr(cfg: RunConfig, design_df: pd.DataFrame, var: str, b=None) -> float:
    """Configured IQR override if present, else the estimation-sample IQR."""
    if b is not None and f"{var}.{b.label}" in cfg.effects_iqr:
        return cfg.effects_iqr[f"{var}.{b.label}"]
    if var in cfg.effects_iqr:
        return cfg.effects_iqr[var]
    values = design_df[var]
    if b is not None:
        values = values[(design_df["year"] >= b.start) & (design_df["year"] <= b.end)]
    values = values.dropna()
    if len(values) == 0:
        return float("nan")
    return float(np.percentile(values, 75) - np.percentile(values, 25))


def effects_table(cfg: RunConfig, spec, fit, frame: pd.DataFrame) -> pd.DataFrame:
    """Per-variable (and per-bin) IQR price effects implied by a fit."""
    rows = []
    for var in spec.endogenous:
        base = fit.coefficients.get(var, float("nan"))
        bins = spec.interactions.get(var)
        if not bins:
            delta = _bin_iqr(cfg, frame, var)
            eff = estimation.iqr_effect(base, delta)
            rows.append(
                {"variable": var, "bin": "", "coefficient": base,
                 "iqr": delta, "percent_linear": eff.percent_linear,
                 "percent_exact": eff.percent_exact}
            )
            continue
        ordered = sorted(bins, key=lambda x: x.start)
        for i, b in enumerate(ordered):
            coef = base if i == 0 else base + fit.coefficients.get(f"{var}@{b.label}", 0.0)
            delta = _bin_iqr(cfg, frame, var, b)
            eff = estimation.iqr_effect(coef, delta)
            rows.append(
                {"variable": var, "bin": b.label, "coefficient": coef,
                 "iqr": delta, "percent_linear": eff.percent_linear,
                 "percent_exact": eff.percent_exact}
            )
    return pd.DataFrame(rows)


def stage_estimate(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    pnl = _read(cfg, "panel.csv")
    mets = _read(cfg, "metrics.csv")
    ivs = _read(cfg, "instruments.csv")
    frame = estimation.assemble_estimation_frame(pnl, mets, ivs)

    for spec in cfg.specs:
        design = estimation.build_design(frame, spec, cluster="market")
        plan = None
        if spec.control_function and cfg.bootstrap_enabled and cfg.bootstrap_replicates > 0:
            plan = estimation.BootstrapPlan(
                replicates=cfg.bootstrap_replicates,
                seed=int(cfg.raw.get("bootstrap.seed", cfg.seed)),
                cluster=cfg.bootstrap_cluster,
                n_jobs=cfg.threads,
            )
        if spec.control_function:
            fit = estimation.control_function_fit(design, spec, bootstrap=plan)
        else:
            fit = estimation.fe_ols_fit(design, spec)

        out.write(fit.coefficient_table(), f"fit_{spec.name}.csv")
        fs = pd.DataFrame(
            [
                {"variable": v,
                 "f_classical": fit.first_stage_f.get(v, float("nan")),
                 "f_robust": fit.first_stage_f_robust.get(v, float("nan")),
                 "f_cluster": fit.first_stage_f_cluster.get(v, float("nan")),
                 "instruments": ";".join(spec.instruments_for(v))}
                for v in (spec.endogenous if spec.control_function else [])
            ],
            columns=["variable", "f_classical", "f_robust", "f_cluster", "instruments"],
        )
        out.write(fs, f"first_stage_{spec.name}.csv")
        design_df = frame.dropna(
            subset=[c for c in ([spec.dependent] + spec.endogenous) if c in frame.columns]
        )
        out.write(effects_table(cfg, spec, fit, design_df), f"effects_{spec.name}.csv")
        out.write(
            pd.DataFrame(
                [
                    {"key": "n_obs", "value": fit.n_obs},
                    {"key": "n_markets", "value": fit.n_clusters},
                    {"key": "n_absorbed", "value": fit.n_absorbed},
                    {"key": "r2_within", "value": fit.r2_within},
                    {"key": "control_function", "value": fit.control_function},
                    {"key": "bootstrap_replicates", "value": fit.bootstrap_replicates},
                    {"key": "bootstrap_seed", "value": fit.bootstrap_seed},
                    {"key": "bootstrap_redraws", "value": fit.bootstrap_redraws},
                    {"key": "demeaning_sweeps", "value": fit.demeaning_sweeps},
                ]
            ),
            f"fit_{spec.name}_stats.csv",
        )
    return {"inputs": {}, "outputs": out.publish(), "rows": out.rows}


def stage_report(cfg: RunConfig) -> dict:
    out = StageWriter(cfg.out_dir)
    text = report.render_run_report(cfg)
    out.write_text(text, "report.txt")
    entry = {"inputs": {}, "outputs": out.publish(), "rows": {}}
    return entry


def stage_synth(cfg: RunConfig) -> dict:
    out_dir = cfg.out_dir
    truth = synth.generate(cfg.synth, out_dir)
    hashes = {p.name: _sha256(p) for p in sorted(out_dir.iterdir()) if p.is_file()}
    return {"stage": "synth", "inputs": {}, "outputs": hashes,
            "rows": {"cells": len(truth.cells)}}


def run_pipeline(cfg: RunConfig, stages: tuple = STAGES) -> dict:
    """Run the requested stages in order and write manifest.json."""
    manifest: list = []
    for name in stages:
        run_stage(name, cfg, manifest)
    doc = {
        "seed": cfg.seed,
        "quarters": list(cfg.quarters),
        "stages": manifest,
    }
    path = cfg.out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
