"""Fixed-effects least squares with a control-function endogeneity stage.

The three-way fixed-effect structure (carrier, market, year) is absorbed by
iterated group demeaning (alternating projections) to a relative tolerance of
1e-10. First stages regress each endogenous variable on its instrument set
plus the exogenous controls under the same fixed effects; their residuals
enter the outcome regression as control functions. Standard errors come in
classical, heteroskedasticity-robust and cluster-bootstrap flavors; the
bootstrap resamples whole markets with replacement and is deterministic given
its seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import cho_factor as _cho_factor, cho_solve as _cho_solve

from .errors import ConvergenceError, EstimationError

F_CAP = 1e12
MAX_SWEEPS = 10_000
DEMEAN_TOL = 1e-10

OWN_WX = ["own_wx_precipitation", "own_wx_snowfall", "own_wx_snow_depth",
          "own_wx_min_temperature"]
COMP_WX = ["comp_wx_precipitation", "comp_wx_snowfall", "comp_wx_snow_depth",
           "comp_wx_min_temperature"]
COMP_NET = ["comp_net_origin_sum", "comp_net_origin_mean",
            "comp_net_dest_sum", "comp_net_dest_mean"]

#: Default instrument assignment. The contact measure's first stage omits the
#: regional-specific weather and regional-network variables; the usage-share
#: first stage uses the carrier's own route extremes; the overlap and
#: concentration first stages use competitors' extremes and networks.
DEFAULT_IV_MAP = {
    "csc_baseline": COMP_WX + ["comp_regional_network"] + COMP_NET,
    "csc_count": COMP_WX + ["comp_regional_network"] + COMP_NET,
    "csc_weighted": COMP_WX + ["comp_regional_network"] + COMP_NET,
    "regional_hhi": COMP_WX + ["comp_regional_network"],
    "regional_share": OWN_WX + COMP_NET,
    "mmc": COMP_NET,
}


@dataclass(frozen=True)
class PeriodBin:
    label: str
    start: int
    end: int

    def contains(self, years: np.ndarray) -> np.ndarray:
        return (years >= self.start) & (years <= self.end)


@dataclass
class RegressionSpec:
    """Model definition: outcome, endogenous block, instruments, bins."""

    name: str
    dependent: str = "log_price"
    endogenous: list = field(default_factory=lambda: ["csc_baseline", "regional_share", "mmc"])
    exogenous: list = field(default_factory=lambda: ["network_origin", "network_destination"])
    fixed_effects: tuple = ("carrier", "market", "year")
    iv_map: dict = field(default_factory=dict)
    interactions: dict = field(default_factory=dict)  # var -> [PeriodBin,...]
    control_function: bool = True

    def instruments_for(self, var: str) -> list:
        if var in self.iv_map:
            return list(self.iv_map[var])
        if var in DEFAULT_IV_MAP:
            return list(DEFAULT_IV_MAP[var])
        raise EstimationError(f"no instrument set for endogenous variable {var!r}")

    def validate(self) -> None:
        if self.dependent not in ("log_price", "log_traffic"):
            raise EstimationError(f"unknown dependent {self.dependent!r}")
        if self.control_function:
            for var in self.endogenous:
                if not self.instruments_for(var):
                    raise EstimationError(f"empty instrument set for {var!r}")


@dataclass
class PanelDesign:
    """Numeric design: outcome, regressors, instruments, group structure."""

    y: np.ndarray
    X: np.ndarray
    x_names: list
    Z: np.ndarray
    z_names: list
    fe: list            # dense int codes per FE dimension
    fe_names: list
    cluster: np.ndarray  # dense int codes, first-appearance order
    n_dropped_missing: int
    n_dropped_singleton: int

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_clusters(self) -> int:
        return int(self.cluster.max()) + 1 if len(self.cluster) else 0

    def z_cols(self, names: list) -> np.ndarray:
        idx = [self.z_names.index(n) for n in names]
        return self.Z[:, idx]


def assemble_estimation_frame(
    pnl: pd.DataFrame, mets: pd.DataFrame, ivs: pd.DataFrame
) -> pd.DataFrame:
    """Join the panel with market metrics and instruments; add log outcomes."""
    df = pnl.merge(mets, on=["market", "year", "quarter"], how="left")
    df = df.merge(ivs, on=["carrier", "market", "year", "quarter"], how="left")
    df["log_price"] = np.log(df["price"])
    df["log_traffic"] = np.log(df["traffic"])
    return df


def interaction_columns(
    df: pd.DataFrame, spec: RegressionSpec
) -> tuple[pd.DataFrame, list]:
    """Materialize var-by-period-bin columns; earliest bin is the base."""
    names = []
    out = df
    for var, bins in spec.interactions.items():
        ordered = sorted(bins, key=lambda b: b.start)
        years = df["year"].to_numpy()
        covered = np.zeros(len(df), dtype=bool)
        for b in ordered:
            in_bin = b.contains(years)
            if not in_bin.any():
                raise EstimationError(f"empty interaction bin {b.label!r} for {var!r}")
            covered |= in_bin
        if not covered.all():
            missing = sorted(set(years[~covered]))
            raise EstimationError(f"interaction bins for {var!r} do not cover years {missing}")
        for b in ordered[1:]:
            col = f"{var}@{b.label}"
            out = out.assign(**{col: df[var].to_numpy() * b.contains(years)})
            names.append(col)
    return out, names


def build_design(
    df: pd.DataFrame,
    spec: RegressionSpec,
    cluster: str = "market",
) -> PanelDesign:
    """Listwise-delete, drop singleton groups, encode groups densely."""
    spec.validate()
    df, inter_names = interaction_columns(df, spec)
    x_names = list(spec.endogenous) + inter_names + list(spec.exogenous)
    z_names = []
    if spec.control_function:
        for var in spec.endogenous:
            for z in spec.instruments_for(var):
                if z not in z_names:
                    z_names.append(z)
    used = [spec.dependent] + x_names + z_names
    missing_cols = [c for c in used if c not in df.columns]
    if missing_cols:
        raise EstimationError(f"design columns absent from data: {missing_cols}")

    cols = list(dict.fromkeys(used + list(spec.fixed_effects) + [cluster]))
    sub = df[cols]
    keep = sub[used].notna().all(axis=1)
    n_missing = int((~keep).sum())
    sub = sub[keep]

    # Iteratively drop singleton fixed-effect groups.
    n_singleton = 0
    while True:
        drop = np.zeros(len(sub), dtype=bool)
        for dim in spec.fixed_effects:
            counts = sub.groupby(dim)[dim].transform("size").to_numpy()
            drop |= counts == 1
        if not drop.any():
            break
        n_singleton += int(drop.sum())
        sub = sub[~drop]
    if len(sub) == 0:
        raise EstimationError("design is empty after deletion")

    fe_codes = [
        pd.factorize(sub[dim].to_numpy())[0].astype(np.int64)
        for dim in spec.fixed_effects
    ]
    cl = pd.factorize(sub[cluster].to_numpy())[0].astype(np.int64)
    return PanelDesign(
        y=sub[spec.dependent].to_numpy(dtype=np.float64),
        X=sub[x_names].to_numpy(dtype=np.float64),
        x_names=x_names,
        Z=sub[z_names].to_numpy(dtype=np.float64) if z_names else np.empty((len(sub), 0)),
        z_names=z_names,
        fe=fe_codes,
        fe_names=list(spec.fixed_effects),
        cluster=cl,
        n_dropped_missing=n_missing,
        n_dropped_singleton=n_singleton,
    )


def within_transform(
    M: np.ndarray,
    fe: list,
    weights: np.ndarray | None = None,
    tol: float = DEMEAN_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> tuple[np.ndarray, int]:
    """Demean columns over every fixed-effect dimension until orthogonal.

    Plain alternating projections: each sweep removes (weighted) group means
    for every dimension in turn; convergence is reached when the largest mean
    removed in a sweep is at most ``tol`` relative to the column scale.
    """
    out = np.array(M, dtype=np.float64, copy=True)
    single = out.ndim == 1
    if single:
        out = out[:, None]
    n, k = out.shape
    scale = np.abs(out).max(axis=0)
    scale[scale == 0] = 1.0

    n_groups = [int(codes.max()) + 1 if len(codes) else 0 for codes in fe]
    if weights is None:
        denom = [
            np.bincount(codes, minlength=g).astype(np.float64)
            for codes, g in zip(fe, n_groups)
        ]
        w = None
    else:
        w = np.asarray(weights, dtype=np.float64)
        denom = [
            np.bincount(codes, weights=w, minlength=g)
            for codes, g in zip(fe, n_groups)
        ]
    for d in denom:
        d[d == 0] = 1.0

    # Converge three decades below the orthogonality tolerance so the result
    # is also numerically idempotent; accept the floating-point floor once the
    # contract tolerance is met and the adjustment has stopped shrinking.
    target = tol * 1e-3
    means = [np.empty((g, k)) for g in n_groups]
    prev = np.inf
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for codes, g, dnm, mbuf in zip(fe, n_groups, denom, means):
            src = out if w is None else out * w[:, None]
            for j in range(k):
                mbuf[:, j] = np.bincount(codes, weights=src[:, j], minlength=g)
            mbuf /= dnm[:, None]
            out -= mbuf[codes]
            rel = np.abs(mbuf).max(axis=0) / scale
            worst = max(worst, float(rel.max()))
        if worst <= target or (worst <= tol and worst >= 0.9 * prev):
            return (out[:, 0] if single else out), sweep
        prev = worst
    raise ConvergenceError(
        f"demeaning did not converge in {max_sweeps} sweeps "
        f"(last sweep relative adjustment {worst:.3e}, tolerance {tol:.0e})"
    )


def absorbed_parameters(fe: list) -> int:
    """Estimable fixed-effect levels: sum of group counts less (dims - 1)."""
    groups = [int(codes.max()) + 1 for codes in fe]
    return sum(groups) - (len(groups) - 1)


def _wls(y: np.ndarray, X: np.ndarray, w: np.ndarray | None):
    """Least squares, optionally frequency-weighted; returns (beta, resid, rank).

    Solves the normal equations (columns here are few and pre-demeaned) and
    falls back to an SVD solve when the cross-product is not comfortably
    positive definite, reporting the reduced rank.
    """
    if w is None:
        Xs, ys = X, y
    else:
        s = np.sqrt(w)
        Xs, ys = X * s[:, None], y * s
    k = X.shape[1]
    if k == 0:
        return np.empty(0), y.copy(), 0
    xtx = Xs.T @ Xs
    xty = Xs.T @ ys
    try:
        c, low = _cho_factor(xtx, lower=True, check_finite=False)
        diag = np.diag(c)
        if np.min(diag) <= 1e-9 * np.max(diag):
            raise np.linalg.LinAlgError
        beta = _cho_solve((c, low), xty, check_finite=False)
        rank = k
    except (np.linalg.LinAlgError, ValueError):
        beta, _, rank, _ = np.linalg.lstsq(Xs, ys, rcond=None)
    resid = y - X @ beta
    return beta, resid, rank


def _name_collinear(X: np.ndarray, names: list) -> list:
    from scipy.linalg import qr

    if X.shape[1] == 0:
        return []
    _, r, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    cut = diag[0] * max(X.shape) * np.finfo(float).eps if len(diag) else 0.0
    rank = int((diag > cut).sum())
    return [names[i] for i in sorted(piv[rank:])]


def _vcov(X: np.ndarray, resid: np.ndarray, dof: int, w: np.ndarray | None):
    """Classical and HC1-style robust covariance with absorbed-FE dof."""
    if w is not None:
        Xe = X * np.sqrt(w)[:, None]
        re = resid * np.sqrt(w)
    else:
        Xe, re = X, resid
    xtx_inv = np.linalg.pinv(Xe.T @ Xe)
    rss = float(re @ re)
    classical = xtx_inv * (rss / dof)
    score = Xe * re[:, None]
    meat = score.T @ score
    robust = xtx_inv @ meat @ xtx_inv * (len(resid) / dof)
    return classical, robust, rss


@dataclass
class FirstStage:
    variable: str
    instruments: list
    residuals: np.ndarray
    f_classical: float
    f_robust: float
    f_cluster: float = float("nan")


def _cluster_f(X: np.ndarray, resid: np.ndarray, beta: np.ndarray, q: int,
               clusters: np.ndarray, dof: int) -> float:
    """Wald F on the leading q coefficients with cluster-summed scores."""
    xtx_inv = np.linalg.pinv(X.T @ X)
    score = X * resid[:, None]
    n_cl = int(clusters.max()) + 1
    sums = np.zeros((n_cl, X.shape[1]))
    for j in range(X.shape[1]):
        sums[:, j] = np.bincount(clusters, weights=score[:, j], minlength=n_cl)
    meat = sums.T @ sums
    scale = (n_cl / max(n_cl - 1, 1)) * ((len(resid) - 1) / max(dof, 1))
    vcov = xtx_inv @ meat @ xtx_inv * scale
    vz = vcov[:q, :q]
    bz = beta[:q]
    try:
        return min(float(bz @ np.linalg.solve(vz, bz)) / q, F_CAP)
    except np.linalg.LinAlgError:
        return F_CAP


def first_stage(
    design: PanelDesign,
    spec: RegressionSpec,
    Xd: np.ndarray,
    Zd: np.ndarray,
    Wd: np.ndarray,
    weights: np.ndarray | None = None,
    want_f: bool = True,
) -> dict:
    """Regress each demeaned endogenous variable on its instruments + controls.

    Returns per-variable residual vectors and the joint F statistics of the
    excluded instruments (classical and robust; capped when residual variance
    vanishes). Bootstrap replicates skip the F computation.
    """
    out = {}
    n = design.n
    n_abs = absorbed_parameters(design.fe)
    for var in spec.endogenous:
        ivs = spec.instruments_for(var)
        e = Xd[:, design.x_names.index(var)]
        zi = [design.z_names.index(zc) for zc in ivs]
        Zvar = Zd[:, zi]
        q = Zvar.shape[1]
        full = np.hstack([Zvar, Wd])
        beta, resid, rank = _wls(e, full, weights)
        if rank < full.shape[1]:
            bad = _name_collinear(full, ivs + [f"exog{i}" for i in range(Wd.shape[1])])
            raise EstimationError(
                f"first stage for {var!r} is rank deficient; collinear: {bad}"
            )
        f_classical = f_robust = f_cluster = float("nan")
        if want_f:
            dof = max(n - full.shape[1] - n_abs, 1)
            _, robust_v, rss_u = _vcov(full, resid, dof, weights)
            _, resid_r, _ = _wls(e, Wd, weights) if Wd.shape[1] else (None, e.copy(), None)
            if weights is not None:
                rss_r = float((resid_r * resid_r * weights).sum())
            else:
                rss_r = float(resid_r @ resid_r)
            if rss_u <= 1e-300 * max(rss_r, 1.0):
                f_classical = F_CAP
            else:
                f_classical = min(((rss_r - rss_u) / q) / (rss_u / dof), F_CAP)
            vz = robust_v[:q, :q]
            bz = beta[:q]
            try:
                f_robust = min(float(bz @ np.linalg.solve(vz, bz)) / q, F_CAP)
            except np.linalg.LinAlgError:
                f_robust = F_CAP
            if weights is None and len(design.cluster) == n:
                f_cluster = _cluster_f(full, resid, beta, q, design.cluster, dof)
        out[var] = FirstStage(
            variable=var,
            instruments=ivs,
            residuals=resid,
            f_classical=float(f_classical),
            f_robust=float(f_robust),
            f_cluster=float(f_cluster),
        )
    return out


@dataclass
class FitResult:
    name: str
    dependent: str
    coefficients: dict
    se_classical: dict
    se_robust: dict
    se_bootstrap: dict | None
    first_stage_f: dict
    first_stage_f_robust: dict
    first_stage_f_cluster: dict
    r2_within: float
    n_obs: int
    n_clusters: int
    n_absorbed: int
    control_function: bool
    bootstrap_replicates: int = 0
    bootstrap_seed: int | None = None
    bootstrap_redraws: int = 0
    demeaning_sweeps: int = 0

    def coefficient_table(self) -> pd.DataFrame:
        rows = []
        for name, beta in self.coefficients.items():
            se = (self.se_bootstrap or self.se_robust).get(name, np.nan)
            z = beta / se if se and se > 0 else np.nan
            p = 2 * stats.norm.sf(abs(z)) if np.isfinite(z) else np.nan
            stars = "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""
            rows.append(
                {
                    "term": name,
                    "coefficient": beta,
                    "se": se,
                    "se_classical": self.se_classical.get(name, np.nan),
                    "se_robust": self.se_robust.get(name, np.nan),
                    "se_bootstrap": (self.se_bootstrap or {}).get(name, np.nan),
                    "p_value": p,
                    "stars": stars,
                }
            )
        return pd.DataFrame(rows)


def _point_estimates(
    design: PanelDesign,
    spec: RegressionSpec,
    weights: np.ndarray | None = None,
    keep: np.ndarray | None = None,
    want_inference: bool = False,
):
    """Shared fit kernel: demean, first stages, augmented outcome regression.

    With ``keep``/``weights`` this is the bootstrap-replicate path; the full
    sample calls it once with inference enabled.
    """
    if keep is None:
        y, X, Z = design.y, design.X, design.Z
        fe = design.fe
    else:
        y, X, Z = design.y[keep], design.X[keep], design.Z[keep]
        fe = [pd.factorize(codes[keep])[0].astype(np.int64) for codes in design.fe]
        for codes in fe:
            if codes.max() < 1:
                raise EstimationError("replicate lost a fixed-effect dimension")

    stacked = np.column_stack([y, X, Z])
    demeaned, sweeps = within_transform(stacked, fe, weights=weights)
    yd = demeaned[:, 0]
    Xd = demeaned[:, 1 : 1 + X.shape[1]]
    Zd = demeaned[:, 1 + X.shape[1] :]
    n_exog = len(spec.exogenous)
    Wd = Xd[:, Xd.shape[1] - n_exog :] if n_exog else np.empty((len(yd), 0))

    names = list(design.x_names)
    if spec.control_function:
        sub = PanelDesign(
            y=yd, X=Xd, x_names=design.x_names, Z=Zd, z_names=design.z_names,
            fe=fe, fe_names=design.fe_names, cluster=design.cluster,
            n_dropped_missing=0, n_dropped_singleton=0,
        )
        stages = first_stage(sub, spec, Xd, Zd, Wd, weights, want_f=want_inference)
        resid_block = np.column_stack([stages[v].residuals for v in spec.endogenous])
        full = np.hstack([Xd, resid_block])
        names = names + [f"resid_{v}" for v in spec.endogenous]
    else:
        stages = {}
        full = Xd

    beta, resid, rank = _wls(yd, full, weights)
    if rank < full.shape[1]:
        raise EstimationError(
            f"outcome regression rank deficient; collinear: {_name_collinear(full, names)}"
        )
    if not want_inference:
        return beta, names, stages, sweeps

    n = len(yd)
    n_abs = absorbed_parameters(fe)
    dof = max(n - full.shape[1] - n_abs, 1)
    classical, robust, rss = _vcov(full, resid, dof, weights)
    tss = float(yd @ yd)
    r2 = 1.0 - rss / tss if tss > 0 else np.nan
    return beta, names, stages, sweeps, classical, robust, r2


def fe_ols_fit(design: PanelDesign, spec: RegressionSpec) -> FitResult:
    """Plain fixed-effects least squares (no endogeneity correction)."""
    plain = RegressionSpec(**{**spec.__dict__, "control_function": False})
    beta, names, _, sweeps, classical, robust, r2 = _point_estimates(
        design, plain, want_inference=True
    )
    return FitResult(
        name=spec.name,
        dependent=spec.dependent,
        coefficients=dict(zip(names, beta)),
        se_classical=dict(zip(names, np.sqrt(np.maximum(np.diag(classical), 0)))),
        se_robust=dict(zip(names, np.sqrt(np.maximum(np.diag(robust), 0)))),
        se_bootstrap=None,
        first_stage_f={},
        first_stage_f_robust={},
        first_stage_f_cluster={},
        r2_within=r2,
        n_obs=design.n,
        n_clusters=design.n_clusters,
        n_absorbed=absorbed_parameters(design.fe),
        control_function=False,
        demeaning_sweeps=sweeps,
    )


def control_function_fit(
    design: PanelDesign,
    spec: RegressionSpec,
    bootstrap: "BootstrapPlan | None" = None,
) -> FitResult:
    """Outcome regression augmented with first-stage residual controls."""
    beta, names, stages, sweeps, classical, robust, r2 = _point_estimates(
        design, spec, want_inference=True
    )
    boot_se = None
    replicates = redraws = 0
    seed = None
    if bootstrap is not None:
        boot = bootstrap_se(design, spec, bootstrap)
        boot_se = dict(zip(names, boot.se))
        replicates, redraws, seed = bootstrap.replicates, boot.redraws, bootstrap.seed
    return FitResult(
        name=spec.name,
        dependent=spec.dependent,
        coefficients=dict(zip(names, beta)),
        se_classical=dict(zip(names, np.sqrt(np.maximum(np.diag(classical), 0)))),
        se_robust=dict(zip(names, np.sqrt(np.maximum(np.diag(robust), 0)))),
        se_bootstrap=boot_se,
        first_stage_f={v: s.f_classical for v, s in stages.items()},
        first_stage_f_robust={v: s.f_robust for v, s in stages.items()},
        first_stage_f_cluster={v: s.f_cluster for v, s in stages.items()},
        r2_within=r2,
        n_obs=design.n,
        n_clusters=design.n_clusters,
        n_absorbed=absorbed_parameters(design.fe),
        control_function=True,
        bootstrap_replicates=replicates,
        bootstrap_seed=seed,
        bootstrap_redraws=redraws,
        demeaning_sweeps=sweeps,
    )


def period_interaction_fit(
    design: PanelDesign,
    spec: RegressionSpec,
    bootstrap: "BootstrapPlan | None" = None,
) -> FitResult:
    """Control-function fit with period-bin interactions.

    The base coefficient of an interacted variable is its earliest-bin effect;
    each interaction coefficient is the difference of that bin's effect from
    the base. Bin validation happens during design construction.
    """
    if not spec.interactions:
        raise EstimationError("period_interaction_fit requires interaction bins")
    return control_function_fit(design, spec, bootstrap)


@dataclass
class BootstrapPlan:
    replicates: int = 1000
    seed: int = 0
    cluster: str = "market"   # 'market' (cluster) or 'observation' (iid rows)
    max_redraws_per_rep: int = 100
    n_jobs: int = 1


@dataclass
class BootstrapResult:
    se: np.ndarray
    names: list
    redraws: int
    estimates: np.ndarray


def _one_replicate(args):
    design, spec, seed, rep, max_redraws, cluster_ids = args
    for attempt in range(max_redraws):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(rep, attempt))
        )
        n_cl = int(cluster_ids.max()) + 1
        draw = rng.integers(0, n_cl, n_cl)
        w_cluster = np.bincount(draw, minlength=n_cl).astype(np.float64)
        w = w_cluster[cluster_ids]
        keep = w > 0
        try:
            beta, _, _, _ = _point_estimates(design, spec, weights=w[keep], keep=keep)
            return beta, attempt
        except (EstimationError, ConvergenceError):
            continue
    raise EstimationError(f"bootstrap replicate {rep} degenerate after {max_redraws} redraws")


def bootstrap_se(
    design: PanelDesign, spec: RegressionSpec, plan: BootstrapPlan
) -> BootstrapResult:
    """Cluster (or observation) bootstrap standard errors.

    Replicate r draws its resampling weights from a generator keyed by
    (seed, r, attempt), so results are independent of scheduling and identical
    across reruns with the same seed. Replicates that lose a fixed-effect
    dimension or produce a rank-deficient design are redrawn and counted.
    """
    if plan.replicates < 1:
        raise EstimationError("bootstrap needs at least one replicate")
    if plan.cluster == "observation":
        cluster_ids = np.arange(design.n, dtype=np.int64)
    else:
        cluster_ids = design.cluster
    jobs = [
        (design, spec, plan.seed, rep, plan.max_redraws_per_rep, cluster_ids)
        for rep in range(plan.replicates)
    ]
    if plan.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.n_jobs) as pool:
            results = list(pool.map(_one_replicate, jobs, chunksize=16))
    else:
        results = [_one_replicate(j) for j in jobs]
    estimates = np.vstack([beta for beta, _ in results])
    redraws = sum(attempt for _, attempt in results)
    se = estimates.std(axis=0, ddof=1)
    names = list(design.x_names)
    if spec.control_function:
        names += [f"resid_{v}" for v in spec.endogenous]
    return BootstrapResult(se=se, names=names, redraws=redraws, estimates=estimates)


@dataclass
class IqrEffect:
    coefficient: float
    delta: float
    percent_linear: float
    percent_exact: float


def iqr_effect(coefficient: float, delta_iqr: float) -> IqrEffect:
    """Percent outcome change for an interquartile-range regressor move.

    ``percent_linear`` is the semi-elasticity approximation 100*b*d;
    ``percent_exact`` is 100*(exp(b*d) - 1).
    """
    if not math.isfinite(coefficient):
        raise EstimationError("coefficient must be finite")
    if delta_iqr < 0:
        raise EstimationError("IQR change must be nonnegative")
    bd = coefficient * delta_iqr
    return IqrEffect(
        coefficient=coefficient,
        delta=delta_iqr,
        percent_linear=100.0 * bd,
        percent_exact=100.0 * (math.exp(bd) - 1.0),
    )
