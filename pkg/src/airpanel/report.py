"""Human-readable rendering of fit outputs: coefficient tables, first-stage
F blocks and the per-period IQR effect grid."""

from __future__ import annotations

from pathlib import Path

import pandas as pd


def _fmt(x, digits=4) -> str:
    if pd.isna(x):
        return "."
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


def render_coefficients(fit_df: pd.DataFrame, title: str) -> str:
    lines = [title, "=" * len(title)]
    lines.append(f"{'term':<28}{'coef':>12}{'se':>12}{'p':>9}  sig")
    lines.append("-" * 65)
    for _, r in fit_df.iterrows():
        lines.append(
            f"{r['term']:<28}{_fmt(r['coefficient']):>12}{_fmt(r['se']):>12}"
            f"{_fmt(r['p_value'], 3):>9}  {r['stars']}"
        )
    lines.append("-" * 65)
    lines.append("significance: *** 1%  ** 5%  * 10%")
    return "\n".join(lines)


def render_first_stage(fs_df: pd.DataFrame) -> str:
    if len(fs_df) == 0:
        return ""
    lines = ["first-stage F (excluded instruments)"]
    for _, r in fs_df.iterrows():
        lines.append(
            f"  {r['variable']:<24} classical {_fmt(r['f_classical'], 1):>10}"
            f"   robust {_fmt(r['f_robust'], 1):>10}"
        )
    return "\n".join(lines)


def render_effects_grid(effects_df: pd.DataFrame) -> str:
    """Period-by-variable grid of percent effects (empty input: header only)."""
    lines = ["IQR price effects (percent)"]
    if len(effects_df) == 0:
        lines.append("  (no effects)")
        return "\n".join(lines)
    variables = list(dict.fromkeys(effects_df["variable"]))
    bins = list(dict.fromkeys(effects_df["bin"]))
    header = f"{'period':<16}" + "".join(f"{v:>20}" for v in variables)
    lines.append(header)
    lines.append("-" * len(header))
    for b in bins:
        label = b if b else "(full sample)"
        row = [f"{label:<16}"]
        for v in variables:
            hit = effects_df[(effects_df["bin"] == b) & (effects_df["variable"] == v)]
            if len(hit):
                row.append(f"{hit['percent_linear'].iloc[0]:>19.2f}%")
            else:
                row.append(f"{'.':>20}")
        lines.append("".join(row))
    return "\n".join(lines)


def render_fit_report(name: str, out_dir: Path) -> str:
    out_dir = Path(out_dir)
    blocks = []
    fit_path = out_dir / f"fit_{name}.csv"
    if not fit_path.exists():
        return ""
    fit_df = pd.read_csv(fit_path).fillna({"stars": ""})
    blocks.append(render_coefficients(fit_df, f"fit: {name}"))
    stats_path = out_dir / f"fit_{name}_stats.csv"
    if stats_path.exists():
        stats = pd.read_csv(stats_path)
        pairs = ", ".join(f"{r['key']}={r['value']}" for _, r in stats.iterrows())
        blocks.append(pairs)
    fs_path = out_dir / f"first_stage_{name}.csv"
    if fs_path.exists():
        fs = render_first_stage(pd.read_csv(fs_path))
        if fs:
            blocks.append(fs)
    eff_path = out_dir / f"effects_{name}.csv"
    if eff_path.exists():
        eff = pd.read_csv(eff_path)
        if "bin" in eff.columns:
            eff["bin"] = eff["bin"].fillna("").astype(str)
        blocks.append(render_effects_grid(eff))
    return "\n\n".join(b for b in blocks if b)


def render_run_report(cfg) -> str:
    out_dir = Path(cfg.out_dir)
    names = sorted(
        p.name[len("fit_"):-len(".csv")]
        for p in out_dir.glob("fit_*.csv")
        if not p.name.endswith("_stats.csv")
    )
    blocks = [render_fit_report(n, out_dir) for n in names]
    body = "\n\n\n".join(b for b in blocks if b)
    return body + "\n" if body else "(no fits found)\n"
