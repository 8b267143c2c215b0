"""Parameter sweeps, scaling-exponent fits and contour extraction."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .metrics import engine_metrics, near_carnot_predictions, reliability_ratio, tur_bound_f, tur_check
from .spectra import LMG, POWERX, ModelSpec, SpinEnsemble
from .steady_state import SYMMETRIC, weights_preset
from .work_stats import COLLECTIVE, CycleParams, cycle_moments

AXES = ("n", "T_h", "x", "gamma_lmg", "delta")
FIX_DELTA = "fix_delta"
FIX_BETAS = "fix_betas"
CONSTRAINTS = (FIX_DELTA, FIX_BETAS)

INPUT_COLUMNS = [
    "index", "model", "x", "gamma_lmg", "n", "s", "coupling", "weights",
    "omega_c", "omega_h", "beta_c", "beta_h", "T_c", "T_h",
    "theta_c", "theta_h", "delta", "eta", "eta_carnot", "delta_eta", "status",
]
_METRIC_FIELDS = [
    "work_extracted", "work_variance", "reliability", "efficiency", "entropy_production",
    "uncertainty_q", "tur_rhs_collective", "mean_qh", "mean_qc",
]
RESULT_COLUMNS = (
    [f"col_{f}" for f in _METRIC_FIELDS]
    + [f"ind_{f}" for f in _METRIC_FIELDS]
    + ["lambda_r", "col_tur_collective_ok", "col_tur_standard_ok", "col_tur_violation",
       "f_value", "f_large_theta",
       "pred_mean_w", "pred_var_w_two_bath", "pred_var_w_limit", "pred_lambda_r"]
)
COLUMNS = INPUT_COLUMNS + RESULT_COLUMNS


@dataclass(frozen=True)
class SweepPlan:
    base: CycleParams
    axis1: tuple[str, tuple]
    axis2: tuple[str, tuple] | None = None
    constraint: str = FIX_DELTA
    delta: float | None = None  # held fixed under FIX_DELTA; defaults to base.delta
    weights: str = SYMMETRIC

    def __post_init__(self):
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        for axis in filter(None, (self.axis1, self.axis2)):
            name, values = axis
            if name not in AXES:
                raise ValueError(f"unknown sweep axis {name!r}; expected one of {AXES}")
            if len(values) == 0:
                raise ValueError(f"sweep axis {name!r} has an empty grid")
        if self.axis2 is not None and self.axis2[0] == self.axis1[0]:
            raise ValueError("the two sweep axes must differ")

    def points(self) -> list[dict]:
        name1, grid1 = self.axis1
        if self.axis2 is None:
            return [{name1: v} for v in grid1]
        name2, grid2 = self.axis2
        return [{name1: a, name2: b} for a in grid1 for b in grid2]


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared_fit: float
    stderr: float
    window: tuple[float, float]
    points: int


def carnot_closure(omega_c: float, omega_h: float, beta_h: float, delta: float,
                   model: ModelSpec | None = None, ensemble: SpinEnsemble | None = None,
                   coupling: str = COLLECTIVE, weights=None) -> CycleParams:
    """Cycle with ``beta_c`` chosen so that ``beta_c omega_c - beta_h omega_h = delta``."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    beta_c = (beta_h * omega_h + delta) / omega_c
    if not beta_c > beta_h:
        raise ValueError(f"closure gives beta_c={beta_c} <= beta_h={beta_h}")
    return CycleParams.make(model or ModelSpec.linear(), ensemble or SpinEnsemble(1), omega_c,
                            omega_h, beta_c, beta_h, coupling, weights)


def _point_params(plan: SweepPlan, point: dict) -> CycleParams:
    base = plan.base
    model, ensemble = base.model, base.ensemble
    beta_h, beta_c = base.beta_h, base.beta_c
    delta = plan.delta if plan.delta is not None else base.delta
    if "n" in point:
        ensemble = SpinEnsemble(int(point["n"]), ensemble.two_s)
    if "x" in point:
        model = ModelSpec.power(int(point["x"]))
    if "gamma_lmg" in point:
        model = ModelSpec.lmg(float(point["gamma_lmg"]))
    if "T_h" in point:
        beta_h = 1.0 / float(point["T_h"])
    if "delta" in point:
        delta = float(point["delta"])
    if plan.constraint == FIX_DELTA:
        beta_c = (beta_h * base.omega_h + delta) / base.omega_c
    weights = None
    if base.coupling == COLLECTIVE:
        weights = weights_preset(plan.weights, ensemble) if base.weights is None else \
            {tj / 2: w for tj, w in base.weights}
    return CycleParams.make(model, ensemble, base.omega_c, base.omega_h, beta_c, beta_h,
                            base.coupling, weights)


def _model_columns(model: ModelSpec) -> dict:
    return {
        "model": model.kind,
        "x": model.x if model.kind == POWERX else "",
        "gamma_lmg": model.gamma_lmg if model.kind == LMG else "",
    }


def input_row(params: CycleParams, weights_label: str) -> dict:
    row = _model_columns(params.model)
    row.update(
        n=params.ensemble.n,
        s=str(params.ensemble.s),
        coupling=params.coupling,
        weights=weights_label if params.coupling == COLLECTIVE else "",
        omega_c=params.omega_c,
        omega_h=params.omega_h,
        beta_c=params.beta_c,
        beta_h=params.beta_h,
        T_c=1 / params.beta_c if params.beta_c > 0 else math.inf,
        T_h=1 / params.beta_h if params.beta_h > 0 else math.inf,
        theta_c=params.theta_c,
        theta_h=params.theta_h,
        delta=params.delta,
        eta=params.eta,
        eta_carnot=params.eta_carnot,
        delta_eta=params.delta_eta,
    )
    return row


def evaluate_point(params: CycleParams) -> dict:
    """Exact TPM metrics for ``params`` and its independent-qubit baseline, plus predictions."""
    col = engine_metrics(cycle_moments(params), params)
    baseline = params.independent_baseline()
    ind = engine_metrics(cycle_moments(baseline), baseline)
    out = {}
    for prefix, m in (("col", col), ("ind", ind)):
        d = m.as_dict()
        out.update({f"{prefix}_{f}": d[f] for f in _METRIC_FIELDS})
    out["lambda_r"] = reliability_ratio(col, ind) if not (col.degenerate or ind.degenerate) else math.nan
    report = tur_check(col)
    out.update(col_tur_collective_ok=report.collective_bound, col_tur_standard_ok=report.standard_bound,
               col_tur_violation=report.violation)
    if params.theta_c > params.theta_h > 0:
        bound = tur_bound_f(params.theta_c, params.theta_h)
        out.update(f_value=bound.f_value, f_large_theta=bound.f_large_theta)
    else:
        out.update(f_value=math.nan, f_large_theta=math.nan)
    pred = near_carnot_predictions(params)
    out.update(pred_mean_w=pred.mean_w, pred_var_w_two_bath=pred.var_w_two_bath,
               pred_var_w_limit=pred.var_w_limit, pred_lambda_r=pred.lambda_r)
    return out


def _run_one(args) -> dict:
    plan, index, point = args
    row = {"index": index}
    try:
        params = _point_params(plan, point)
    except ValueError as exc:
        row.update({k: point.get(k, "") for k in AXES if k in point})
        row["status"] = f"skip:invalid ({exc})"
        return row
    row.update(input_row(params, plan.weights))
    if not params.is_engine:
        row["status"] = "skip:not-engine"
        return row
    try:
        row.update(evaluate_point(params))
        row["status"] = "ok"
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        row["status"] = f"error:{type(exc).__name__}: {exc}"
    return row


def run_sweep(plan: SweepPlan, threads: int = 1) -> list[dict]:
    """One row per grid point in plan order; skipped and failed points stay in the table."""
    jobs = [(plan, i, p) for i, p in enumerate(plan.points())]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(job) for job in jobs]
    return [{col: row.get(col, "") for col in COLUMNS} for row in rows]


def ok_rows(rows: Iterable[dict]) -> list[dict]:
    return [r for r in rows if r["status"] == "ok"]


def fit_scaling(rows: Sequence[dict], quantity: str, axis: str = "n") -> ScalingFit:
    """Log-log least-squares slope of ``|quantity|`` against ``axis`` over the upper half of the window."""
    pairs = sorted((float(r[axis]), float(r[quantity])) for r in ok_rows(rows))
    if any(v <= 0 or not math.isfinite(v) for _, v in pairs) or any(a <= 0 for a, _ in pairs):
        raise ValueError(f"{quantity} must be positive for a log-log fit")
    upper = pairs[len(pairs) // 2:]
    if len(upper) < 5:
        raise ValueError(f"need at least 5 points in the fit window, got {len(upper)}")
    x = np.log([a for a, _ in upper])
    y = np.log([v for _, v in upper])
    res = stats.linregress(x, y)
    return ScalingFit(float(res.slope), float(math.exp(res.intercept)), float(res.rvalue**2),
                      float(res.stderr), (upper[0][0], upper[-1][0]), len(upper))


def contour_crossings(rows: Sequence[dict], quantity: str, level: float,
                      axis1: str = "n", axis2: str = "T_h") -> list[tuple[dict, dict]]:
    """Pairs of grid neighbours (along either axis) between which ``quantity`` crosses ``level``."""
    grid = {}
    for r in ok_rows(rows):
        v = float(r[quantity])
        if math.isfinite(v):
            grid[(float(r[axis1]), float(r[axis2]))] = (r, v - level)
    a_vals = sorted({k[0] for k in grid})
    b_vals = sorted({k[1] for k in grid})
    crossings = []
    for a in a_vals:
        for b0, b1 in zip(b_vals, b_vals[1:]):
            if (a, b0) in grid and (a, b1) in grid and grid[(a, b0)][1] * grid[(a, b1)][1] < 0:
                crossings.append((grid[(a, b0)][0], grid[(a, b1)][0]))
    for b in b_vals:
        for a0, a1 in zip(a_vals, a_vals[1:]):
            if (a0, b) in grid and (a1, b) in grid and grid[(a0, b)][1] * grid[(a1, b)][1] < 0:
                crossings.append((grid[(a0, b)][0], grid[(a1, b)][0]))
    return crossings


def _format(value, precision: int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{precision}g}"
    return str(value)


def write_csv(rows: Sequence[dict], stream=None, precision: int = 17) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format(row.get(c, ""), precision) for c in COLUMNS])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_jsonl(rows: Sequence[dict], stream=None) -> str:
    lines = [json.dumps({c: _json_value(row.get(c, "")) for c in COLUMNS}) for row in rows]
    text = "".join(line + "\n" for line in lines)
    if stream is not None:
        stream.write(text)
    return text


def single_point_plan(params: CycleParams) -> SweepPlan:
    """A one-row plan reproducing ``params`` exactly (fixed betas along a one-value n axis)."""
    return SweepPlan(replace(params), ("n", (params.ensemble.n,)), constraint=FIX_BETAS,
                     weights=SYMMETRIC)
