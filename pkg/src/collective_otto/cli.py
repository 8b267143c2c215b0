"""Command-line front end: ``collective-otto {cycle,sweep,dynamics,validate}``.

Exit codes: 0 success, 1 computation or validation failure, 2 configuration or usage error.
Every error is reported as one line ``error[<kind>] <field>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, load_preset
from .dynamics import BathSpec, build_rate_matrix, thermalization_time, trace_rows
from .metrics import engine_metrics, near_carnot_predictions, reliability_ratio, tur_bound_f, tur_check
from .spectra import LINEAR, ModelSpec, SpinEnsemble, allowed_j, subspace_spectrum
from .steady_state import SYMMETRIC, WEIGHT_PRESETS, gibbs_block
from .sweep import AXES, FIX_BETAS, FIX_DELTA, SweepPlan, run_sweep, write_csv, write_jsonl
from .validate import FAULTS, LEVELS, run_validation
from .work_stats import cycle_moments

OUTPUT_DIR_ENV = "COLLECTIVE_OTTO_OUTPUT_DIR"
INTEGER_AXES = ("n", "x")

# shortcut flag -> config key
_SHORTCUTS = {
    "model": "model.kind",
    "x": "model.x",
    "gamma_lmg": "model.gamma_lmg",
    "n": "ensemble.n",
    "s": "ensemble.s",
    "omega_c": "cycle.omega_c",
    "omega_h": "cycle.omega_h",
    "beta_c": "cycle.beta_c",
    "beta_h": "cycle.beta_h",
    "delta": "cycle.delta",
    "coupling": "coupling.mode",
    "weights": "coupling.weights",
    "format": "output.format",
    "output": "output.path",
    "precision": "output.precision",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, field: str, message: str, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"error[{kind}] {field}: {text}", file=sys.stderr)
    return code


# --- configuration -----------------------------------------------------------

def _config_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", metavar="PATH", help="INI run configuration")
    g.add_argument("--preset", metavar="NAME", help="shipped preset (applied before --config)")
    g.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any configuration key (repeatable)")
    g.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    g.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for sweeps")
    for flag in _SHORTCUTS:
        g.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None, metavar="VALUE",
                       help=f"same as --set {_SHORTCUTS[flag]}=VALUE")


def resolve_config(args) -> RunConfig:
    cfg = load_preset(args.preset) if args.preset else RunConfig()
    if args.config:
        file_cfg = load_config(args.config)
        cfg = replace(file_cfg) if not args.preset else _merge(cfg, file_cfg)
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(item, "expected SECTION.KEY=VALUE")
        overrides[key.strip()] = value
    for flag, key in _SHORTCUTS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    # a closure flag replaces the other closure key from lower layers
    if "cycle.beta_c" in overrides and "cycle.delta" not in overrides:
        overrides["cycle.delta"] = None
    if "cycle.delta" in overrides and "cycle.beta_c" not in overrides and overrides["cycle.delta"] is not None:
        overrides["cycle.beta_c"] = None
    return cfg.with_overrides(overrides)


def _merge(base: RunConfig, top: RunConfig) -> RunConfig:
    """Fields of ``top`` that differ from the defaults win over ``base``."""
    default = RunConfig()
    changes = {k: v for k, v in vars(top).items() if v != getattr(default, k)}
    if "beta_c" in changes and "delta" not in changes:
        changes["delta"] = None
    if "delta" in changes and "beta_c" not in changes:
        changes["beta_c"] = None
    return replace(base, **changes)


def _output_path(path: str) -> Path | None:
    if not path:
        return None
    p = Path(path)
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path: str) -> None:
    target = _output_path(path)
    if target is None:
        sys.stdout.write(text)
    else:
        target.write_text(text)


def _table_text(rows, cfg: RunConfig) -> str:
    if cfg.format == "jsonl":
        return write_jsonl(rows)
    return write_csv(rows, precision=cfg.precision)


# --- cycle -------------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.10g}"


def cycle_report(cfg: RunConfig) -> tuple[str, list[dict]]:
    params = cfg.cycle_params()
    col = engine_metrics(cycle_moments(params), params)
    baseline = params.independent_baseline()
    ind = engine_metrics(cycle_moments(baseline), baseline)
    pred = near_carnot_predictions(params)
    lam = reliability_ratio(col, ind) if not (col.degenerate or ind.degenerate) else math.nan
    tur = tur_check(col)

    lines = [
        f"model={params.model.label} n={params.ensemble.n} s={params.ensemble.s} "
        f"coupling={params.coupling} weights={cfg.weights if params.coupling == 'collective' else '-'}",
        f"omega_c={_num(params.omega_c)} omega_h={_num(params.omega_h)} "
        f"beta_c={_num(params.beta_c)} beta_h={_num(params.beta_h)}",
        f"theta_c={_num(params.theta_c)} theta_h={_num(params.theta_h)} delta={_num(params.delta)} "
        f"eta={_num(params.eta)} eta_carnot={_num(params.eta_carnot)} delta_eta={_num(params.delta_eta)}",
        "",
        f"{'quantity':<22}{'collective':>20}{'independent':>20}{'near-carnot':>20}",
    ]
    table = [
        ("work extracted", col.work_extracted, ind.work_extracted, -pred.mean_w),
        ("var(W)", col.work_variance, ind.work_variance, pred.var_w_two_bath),
        ("reliability r", col.reliability, ind.reliability, None),
        ("efficiency", col.efficiency, ind.efficiency, params.eta),
        ("entropy production", col.entropy_production, ind.entropy_production, None),
        ("TUR ratio Q", col.uncertainty_q, ind.uncertainty_q, None),
        ("2 - Sigma", col.tur_rhs_collective, ind.tur_rhs_collective, None),
        ("<Q_h>", col.mean_qh, ind.mean_qh, None),
        ("<Q_c>", col.mean_qc, ind.mean_qc, None),
        ("C(theta_h)/theta_h^2", pred.unit_var_h, pred.unit_var_ind_h, None),
    ]
    for name, a, b, c in table:
        lines.append(f"{name:<22}{_num(a):>20}{_num(b):>20}{_num(c):>20}")
    lines += [
        "",
        f"lambda_r = {_num(lam)} (exact TPM)   {_num(pred.lambda_r)} (heat-capacity prediction)",
        f"collective TUR Q >= 2 - Sigma: {_num(tur.collective_bound)}   "
        f"standard TUR Q >= 2: {_num(tur.standard_bound)}",
    ]
    if params.theta_c > params.theta_h > 0:
        bound = tur_bound_f(params.theta_c, params.theta_h)
        lines.append(f"f(delta, theta_h) = {_num(bound.f_value)}   large-theta_h limit {_num(bound.f_large_theta)}")
    rows = run_sweep(SweepPlan(params, ("n", (params.ensemble.n,)), constraint=FIX_BETAS,
                               weights=cfg.weights if cfg.weights in WEIGHT_PRESETS else SYMMETRIC))
    return "\n".join(lines) + "\n", rows


def cmd_cycle(args, cfg: RunConfig) -> int:
    report, rows = cycle_report(cfg)
    sys.stdout.write(report)
    if cfg.path:
        _emit(_table_text(rows, cfg), cfg.path)
    return 0


# --- sweep -------------------------------------------------------------------

def parse_axis(text: str) -> tuple[str, tuple]:
    """``NAME=lo:hi[:step]``, ``NAME=lin:lo:hi:count``, ``NAME=log:lo:hi:count`` or ``NAME=v1,v2,...``."""
    name, sep, spec = text.partition("=")
    name = name.strip()
    if not sep or name not in AXES:
        raise ConfigError("axis", f"expected NAME=GRID with NAME in {AXES}, got {text!r}")
    try:
        if "," in spec:
            values = [float(v) for v in spec.split(",") if v.strip()]
        else:
            parts = spec.split(":")
            if parts[0] in ("lin", "log"):
                lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
                if len(parts) != 4 or count < 0:
                    raise ValueError
                values = list(np.logspace(lo, hi, count) if parts[0] == "log" else np.linspace(lo, hi, count))
            elif len(parts) in (2, 3):
                lo, hi = float(parts[0]), float(parts[1])
                step = float(parts[2]) if len(parts) == 3 else 1.0
                if not step > 0:
                    raise ValueError
                count = math.floor((hi - lo) / step + 1e-9) + 1
                values = [lo + i * step for i in range(max(count, 0))]
            elif len(parts) == 1 and parts[0].strip():
                values = [float(parts[0])]
            else:
                raise ValueError
    except (ValueError, IndexError):
        raise ConfigError("axis", f"cannot parse grid {spec!r}") from None
    if name in INTEGER_AXES:
        if any(v != int(v) for v in values):
            raise ConfigError("axis", f"axis {name} needs integer values")
        values = [int(v) for v in values]
    if not values:
        raise ConfigError("axis", f"axis {name} has an empty grid")
    return name, tuple(values)


def cmd_sweep(args, cfg: RunConfig) -> int:
    if args.fix_delta is not None and args.fix_betas:
        raise ConfigError("constraint", "--fix-delta and --fix-betas are exclusive")
    if args.fix_delta not in (None, True):
        cfg = replace(cfg, delta=_float_arg("fix-delta", args.fix_delta), beta_c=None)
    constraint = FIX_BETAS if args.fix_betas else FIX_DELTA
    if args.fix_delta is None and not args.fix_betas and cfg.delta is None:
        constraint = FIX_BETAS
    axis1 = parse_axis(args.axis)
    axis2 = parse_axis(args.axis2) if args.axis2 else None
    params = cfg.cycle_params()
    try:
        plan = SweepPlan(params, axis1, axis2, constraint, delta=cfg.delta,
                         weights=cfg.weights if cfg.weights in WEIGHT_PRESETS else SYMMETRIC)
    except ValueError as exc:
        raise ConfigError("axis", str(exc)) from None
    if args.threads < 1:
        raise ConfigError("threads", "must be at least 1")
    rows = run_sweep(plan, threads=args.threads)
    _emit(_table_text(rows, cfg), cfg.path)
    failed = sum(r["status"].startswith("error") for r in rows)
    ok = sum(r["status"] == "ok" for r in rows)
    print(f"sweep: {len(rows)} rows, {ok} ok, {len(rows) - ok - failed} skipped, {failed} failed",
          file=sys.stderr)
    return 0


def _float_arg(field: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(field, f"cannot parse {text!r}") from None


# --- dynamics ----------------------------------------------------------------

def cmd_dynamics(args, cfg: RunConfig) -> int:
    if cfg.model != LINEAR:
        raise ConfigError("model.kind", "rate-equation dynamics is defined for the linear model only")
    omega = _float_arg("omega", args.omega) if args.omega is not None else cfg.omega_h
    beta = _float_arg("beta", args.beta) if args.beta is not None else cfg.beta_h
    if omega is None:
        raise ConfigError("cycle.omega_h", "is required (or pass --omega)")
    if beta is None:
        raise ConfigError("cycle.beta_h", "is required (or pass --beta)")
    ens = SpinEnsemble.of(cfg.n, Fraction(cfg.s))
    try:
        j = Fraction(args.j) if args.j is not None else ens.s * ens.n
    except ValueError:
        raise ConfigError("j", f"cannot parse {args.j!r}") from None
    if j not in allowed_j(ens):
        raise ConfigError("j", f"j={j} is not allowed for n={ens.n}, s={ens.s}")
    try:
        bath = BathSpec(beta, _float_arg("base-rate", args.base_rate))
        rates = build_rate_matrix(j, omega, bath)
    except ValueError as exc:
        raise ConfigError("dynamics", str(exc)) from None
    if not args.t_max > 0 or args.steps < 1:
        raise ConfigError("time", "--t-max must be positive and --steps at least 1")
    p0 = np.full(rates.size, 1.0 / rates.size)
    target = gibbs_block(subspace_spectrum(ModelSpec.linear(), ens, j, omega), beta)
    times = np.linspace(0.0, args.t_max, args.steps + 1)
    rows = trace_rows(rates, p0, times)
    text = "t,m,population\n" + "".join(
        f"{t:.{cfg.precision}g},{m:g},{p:.{cfg.precision}g}\n" for t, m, p in rows)
    _emit(text, cfg.path)
    th = thermalization_time(rates, p0, target, args.epsilon)
    print(f"dynamics: j={j} omega={omega:g} beta={beta:g} thermalization time {th.time:.6g} "
          f"(TV < {args.epsilon:g}), spectral gap {th.spectral_gap:.10g}", file=sys.stderr)
    return 0


# --- validate ----------------------------------------------------------------

def cmd_validate(args, cfg: RunConfig) -> int:
    results = run_validation(args.level, args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"validate[{args.level}]: {len(results) - len(failed)}/{len(results)} passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="collective-otto", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cycle", help="metrics of one cycle with its independent baseline")
    _config_options(p)

    p = sub.add_parser("sweep", help="one- or two-axis parameter sweep to CSV/JSONL")
    _config_options(p)
    p.add_argument("--axis", required=True, metavar="NAME=GRID", help=f"first axis, NAME in {AXES}")
    p.add_argument("--axis2", metavar="NAME=GRID", help="optional second axis")
    p.add_argument("--fix-delta", nargs="?", const=True, default=None, metavar="DELTA",
                   help="adjust beta_c to hold delta fixed (optionally setting delta)")
    p.add_argument("--fix-betas", action="store_true", help="hold beta_c and beta_h fixed")

    p = sub.add_parser("dynamics", help="relaxation trace (t, m, population) of one j block")
    _config_options(p)
    p.add_argument("--j", default=None, help="block spin (default n s)")
    p.add_argument("--omega", default=None, help="level spacing (default cycle.omega_h)")
    p.add_argument("--beta", default=None, help="bath inverse temperature (default cycle.beta_h)")
    p.add_argument("--base-rate", default="1.0", help="flat spectral rate Gamma(omega)")
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--epsilon", type=float, default=1e-8, help="TV threshold for the thermalization time")

    p = sub.add_parser("validate", help="run the oracle self-check suite")
    _config_options(p)
    p.add_argument("--level", choices=LEVELS, default="fast")
    p.add_argument("--inject-fault", choices=FAULTS, default=None,
                   help="deliberately break a component to confirm the suite catches it")
    return parser


_COMMANDS = {"cycle": cmd_cycle, "sweep": cmd_sweep, "dynamics": cmd_dynamics, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", "args", exc, 2)
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_ini())
            return 0
        if args.command in ("cycle", "sweep"):
            cfg.validate()
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        return _fail("config", exc.field, exc.message, 2)
    except OSError as exc:
        return _fail("io", getattr(exc, "filename", None) or "output", exc.strerror or exc, 1)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return _fail("compute", type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
