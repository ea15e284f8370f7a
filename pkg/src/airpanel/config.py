"""Run configuration: flat typed keys from TOML, JSON or key=value text.

The configuration contract is a flat map of dotted keys to scalars or lists.
TOML and JSON files are flattened (tables/objects become key prefixes); the
plain-text grammar is one ``key = value`` per line with ``#`` comments,
quoted or bare strings, integers, floats, booleans and ``[a, b, c]`` lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .estimation import DEFAULT_IV_MAP, PeriodBin, RegressionSpec
from .synth import DgpConfig

INPUT_NAMES = (
    "coupons", "tickets", "markets", "ownership", "weather",
    "airport_stations", "airport_states", "cpi",
)


def _parse_scalar(token: str):
    t = token.strip()
    if t.startswith('"') and t.endswith('"') and len(t) >= 2:
        return t[1:-1]
    if t.startswith("'") and t.endswith("'") and len(t) >= 2:
        return t[1:-1]
    low = t.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(tok) for tok in inner.split(",")]
    return _parse_scalar(raw)


def parse_flat_text(text: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        out[key] = _parse_value(raw)
    return out


def _flatten(obj, prefix: str, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(v, f"{prefix}{k}." if not prefix else f"{prefix}{k}.", out)
    else:
        out[prefix[:-1]] = obj


def flatten_mapping(mapping: dict) -> dict:
    out: dict = {}
    for k, v in mapping.items():
        if isinstance(v, dict):
            sub = flatten_mapping(v)
            for sk, sv in sub.items():
                out[f"{k}.{sk}"] = sv
        else:
            out[k] = v
    return out


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        return flatten_mapping(json.loads(text))
    if path.suffix == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return flatten_mapping(tomllib.loads(text))
    return parse_flat_text(text)


def _parse_bins(tokens: list) -> list:
    bins = []
    for tok in tokens:
        parts = str(tok).split(":")
        if len(parts) != 3:
            raise ConfigError(f"bin {tok!r} must be 'label:start_year:end_year'")
        try:
            bins.append(PeriodBin(parts[0], int(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise ConfigError(f"bin {tok!r}: {exc}") from exc
    return bins


@dataclass
class RunConfig:
    """Validated pipeline settings derived from a flat key map."""

    inputs: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    quarters: tuple = (2,)
    seed: int = 0
    threads: int = 1
    unknown_carriers: str = "reject"
    regional_iv_aggregate: str = "sum"
    bootstrap_replicates: int = 200
    bootstrap_cluster: str = "market"
    bootstrap_enabled: bool = True
    specs: list = field(default_factory=list)
    effects_iqr: dict = field(default_factory=dict)
    synth: DgpConfig = field(default_factory=DgpConfig)
    raw: dict = field(default_factory=dict)

    def input_path(self, name: str) -> Path:
        from .ingest import packaged_data

        if name in self.inputs:
            return Path(self.inputs[name])
        if name in ("airport_states", "cpi", "ownership"):
            # These ship with the package as editable defaults.
            return packaged_data(f"{name}.csv")
        raise ConfigError(f"missing required input path: inputs.{name}")

    def validate_inputs(self, required: tuple) -> None:
        for name in required:
            path = self.input_path(name)
            if not path.exists():
                raise ConfigError(f"inputs.{name}: file not found: {path}")


def default_specs() -> list:
    endog = ["csc_baseline", "regional_share", "mmc"]
    return [
        RegressionSpec(name="fe_ols", endogenous=endog, control_function=False),
        RegressionSpec(name="cf_baseline", endogenous=endog, control_function=True),
    ]


def build_run_config(flat: dict, overrides: dict | None = None) -> RunConfig:
    """Materialize a RunConfig from a flat key map plus CLI overrides."""
    flat = dict(flat)
    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})

    cfg = RunConfig(raw=flat)
    for name in INPUT_NAMES:
        key = f"inputs.{name}"
        if key in flat:
            cfg.inputs[name] = str(flat[key])
    if "out" in flat:
        cfg.out_dir = Path(str(flat["out"]))
    if "quarters" in flat:
        q = flat["quarters"]
        q = [q] if isinstance(q, int) else list(q)
        if not q or any(int(x) not in (1, 2, 3, 4) for x in q):
            raise ConfigError(f"quarters must be within 1..4, got {q}")
        cfg.quarters = tuple(int(x) for x in q)
    if "seed" in flat:
        cfg.seed = int(flat["seed"])
    if "threads" in flat:
        cfg.threads = max(1, int(flat["threads"]))
    if "unknown_carriers" in flat:
        if flat["unknown_carriers"] not in ("reject", "major"):
            raise ConfigError("unknown_carriers must be 'reject' or 'major'")
        cfg.unknown_carriers = str(flat["unknown_carriers"])
    if "regional_iv_aggregate" in flat:
        if flat["regional_iv_aggregate"] not in ("sum", "mean"):
            raise ConfigError("regional_iv_aggregate must be 'sum' or 'mean'")
        cfg.regional_iv_aggregate = str(flat["regional_iv_aggregate"])
    if "bootstrap.replicates" in flat:
        cfg.bootstrap_replicates = int(flat["bootstrap.replicates"])
    if "bootstrap.cluster" in flat:
        if flat["bootstrap.cluster"] not in ("market", "observation"):
            raise ConfigError("bootstrap.cluster must be 'market' or 'observation'")
        cfg.bootstrap_cluster = str(flat["bootstrap.cluster"])
    if "bootstrap.enabled" in flat:
        cfg.bootstrap_enabled = bool(flat["bootstrap.enabled"])
    if "bootstrap.seed" in flat:
        cfg.raw["bootstrap.seed"] = int(flat["bootstrap.seed"])

    global_iv = {}
    for key, val in flat.items():
        if key.startswith("iv_map.") and key.count(".") == 1:
            global_iv[key.split(".", 1)[1]] = [str(z) for z in val]

    spec_names = sorted(
        {key.split(".")[1] for key in flat if key.startswith("spec.") and key.count(".") >= 2}
    )
    for name in spec_names:
        prefix = f"spec.{name}."
        spec = RegressionSpec(name=name)
        spec.iv_map = dict(DEFAULT_IV_MAP)
        spec.iv_map.update(global_iv)
        for key, val in flat.items():
            if not key.startswith(prefix):
                continue
            rest = key[len(prefix):]
            if rest == "dependent":
                spec.dependent = str(val)
            elif rest == "endogenous":
                spec.endogenous = [str(v) for v in val]
            elif rest == "exogenous":
                spec.exogenous = [str(v) for v in val]
            elif rest == "control_function":
                spec.control_function = bool(val)
            elif rest.startswith("bins."):
                spec.interactions[rest[len("bins."):]] = _parse_bins(val)
            elif rest.startswith("iv_map."):
                spec.iv_map[rest[len("iv_map."):]] = [str(z) for z in val]
            else:
                raise ConfigError(f"unknown spec key: {key}")
        spec.validate()
        cfg.specs.append(spec)
    if not cfg.specs:
        cfg.specs = default_specs()
        if global_iv:
            for spec in cfg.specs:
                spec.iv_map = dict(DEFAULT_IV_MAP)
                spec.iv_map.update(global_iv)

    for key, val in flat.items():
        if key.startswith("effects.iqr."):
            cfg.effects_iqr[key[len("effects.iqr."):]] = float(val)

    synth_kwargs = {}
    defaults = DgpConfig()
    for key, val in flat.items():
        if key.startswith("synth."):
            field_name = key[len("synth."):]
            if field_name not in DgpConfig.__dataclass_fields__:
                raise ConfigError(f"unknown synth key: {key}")
            current = getattr(defaults, field_name)
            synth_kwargs[field_name] = type(current)(val)
    if "seed" not in synth_kwargs:
        synth_kwargs["seed"] = cfg.seed
    cfg.synth = DgpConfig(**synth_kwargs)
    return cfg


def load_run_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    flat = load_config_file(path) if path else {}
    return build_run_config(flat, overrides)
