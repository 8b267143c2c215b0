"""Self-check suite: cross-validates every computational path against an independent oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .dynamics import BathSpec, build_rate_matrix, kms_ratios, thermalization_time
from .metrics import engine_metrics, tur_bound_f, tur_check
from .spectra import ModelSpec, SpinEnsemble, dimension_check, subspace_spectrum
from .steady_state import gibbs_block
from .thermo import heat_capacity_closed_form_linear, thermo_point, var_h_asymptotic
from .work_stats import (
    INDEPENDENT, CycleParams, characteristic_function, cycle_moments,
    independent_characteristic_function, joint_distribution, moments, moments_from_characteristic,
    product_basis_oracle,
)

FAST, FULL = "fast", "full"
LEVELS = (FAST, FULL)
FAULTS = ("dissipator-sign",)

# high-temperature reference regime
OMEGA_H, OMEGA_C, BETA_H, DELTA = 0.5, 0.1, 1e-6, 0.005


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass(frozen=True)
class _Settings:
    n_max: int
    grid: int
    draws: int
    flip: bool


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _reference_params(n: int, coupling: str = "collective") -> CycleParams:
    beta_c = (BETA_H * OMEGA_H + DELTA) / OMEGA_C
    return CycleParams(ModelSpec.linear(), SpinEnsemble(n), OMEGA_C, OMEGA_H, beta_c, BETA_H, coupling)


def _moment_error(a, b) -> float:
    da, db = a.as_dict(), b.as_dict()
    return max(_rel(da[k], db[k]) for k in ("mean_w", "var_w", "mean_qh", "mean_wq"))


def check_dimensions(cfg: _Settings) -> CheckResult:
    bad = [n for n in range(1, cfg.n_max + 1) if not dimension_check(SpinEnsemble(n))]
    return CheckResult("dimensions", not bad, f"sum l_j (2j+1) = 2^n for n<={cfg.n_max}"
                       + (f"; failed {bad}" if bad else ""))


def check_oracle_triangle(cfg: _Settings) -> CheckResult:
    worst = 0.0
    for n in range(1, min(cfg.n_max, 6) + 1):
        p = _reference_params(n)
        enum = moments(joint_distribution(p))
        worst = max(worst, _moment_error(moments_from_characteristic(
            lambda g1, g2: characteristic_function(p, g1, g2)), enum))
        ind = _reference_params(n, INDEPENDENT)
        scaled = cycle_moments(ind)
        worst = max(worst, _moment_error(moments_from_characteristic(
            lambda g1, g2: independent_characteristic_function(ind, g1, g2)), scaled))
    return CheckResult("oracle_triangle", worst <= 1e-6, f"max relative moment error {worst:.2e} (tol 1e-6)")


def check_product_oracle(cfg: _Settings) -> CheckResult:
    worst = 0.0
    for n in range(1, min(cfg.n_max, 10) + 1):
        p = _reference_params(n, INDEPENDENT)
        worst = max(worst, _moment_error(moments(product_basis_oracle(p)), cycle_moments(p)))
    return CheckResult("product_oracle", worst <= 1e-9, f"4^n enumeration vs n-scaled qubit {worst:.2e} (tol 1e-9)")


def _ladders(cfg: _Settings):
    for two_j in range(1, cfg.n_max + 1):
        for beta in (0.0, 0.3, 1.0, 4.0):
            yield Fraction(two_j, 2), beta, 0.7


def check_detailed_balance(cfg: _Settings) -> CheckResult:
    worst = 0.0
    for j, beta, omega in _ladders(cfg):
        rates = build_rate_matrix(j, omega, BathSpec(beta), flip_orientation=cfg.flip)
        gen = rates.generator()
        target = gibbs_block(subspace_spectrum(ModelSpec.linear(), SpinEnsemble(int(2 * j)), j, omega), beta)
        worst = max(worst, np.abs(gen @ target.populations).max() / np.abs(gen).max())
    return CheckResult("detailed_balance", worst <= 1e-12,
                       f"max |G p_Gibbs| / |G| = {worst:.2e} (tol 1e-12)")


def check_kms(cfg: _Settings) -> CheckResult:
    worst = 0.0
    for j, beta, omega in _ladders(cfg):
        ratios = kms_ratios(build_rate_matrix(j, omega, BathSpec(beta), flip_orientation=cfg.flip))
        worst = max(worst, float(np.max(np.abs(ratios / math.exp(beta * omega) - 1))))
    return CheckResult("kms", worst <= 1e-12, f"max relative KMS ratio error {worst:.2e} (tol 1e-12)")


def check_conservation(cfg: _Settings) -> CheckResult:
    worst = 0.0
    for j, beta, omega in _ladders(cfg):
        gen = build_rate_matrix(j, omega, BathSpec(beta), flip_orientation=cfg.flip).generator()
        worst = max(worst, float(np.abs(gen.sum(axis=0)).max() / max(1.0, np.abs(gen).max())))
    return CheckResult("conservation", worst <= 1e-14, f"max column sum {worst:.2e} (tol 1e-14)")


def check_relaxation(cfg: _Settings) -> CheckResult:
    worst, failed = 0.0, []
    for n in range(1, min(cfg.n_max, 10) + 1):
        j, beta, omega = Fraction(n, 2), 1.0, 1.0
        rates = build_rate_matrix(j, omega, BathSpec(beta), flip_orientation=cfg.flip)
        target = gibbs_block(subspace_spectrum(ModelSpec.linear(), SpinEnsemble(n), j, omega), beta)
        p0 = np.full(rates.size, 1.0 / rates.size)
        try:
            result = thermalization_time(rates, p0, target, 1e-8, t_cap=1e4)
            worst = max(worst, result.residual)
        except RuntimeError:
            failed.append(n)
    ok = not failed and worst < 1e-8
    detail = f"uniform -> Gibbs TV distance {worst:.2e} (tol 1e-8)"
    if failed:
        detail += f"; never converged for n={failed}"
    return CheckResult("relaxation", ok, detail)


def check_tur_draws(cfg: _Settings, seed: int = 20240611) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, violations = math.inf, 0
    for _ in range(cfg.draws):
        n = int(rng.integers(1, cfg.n_max + 1))
        omega_h = float(rng.uniform(0.2, 2.0))
        omega_c = omega_h * float(rng.uniform(0.05, 0.95))
        theta_h = float(10 ** rng.uniform(-4, 0.5))
        delta = float(10 ** rng.uniform(-3, 0.5))
        beta_h = theta_h / omega_h
        p = CycleParams(ModelSpec.linear(), SpinEnsemble(n), omega_c, omega_h,
                        (theta_h + delta) / omega_c, beta_h)
        m = engine_metrics(cycle_moments(p), p)
        margin = m.uncertainty_q - m.tur_rhs_collective
        worst = min(worst, margin)
        violations += not tur_check(m).collective_bound
    return CheckResult("tur_draws", violations == 0,
                       f"{cfg.draws} draws, min Q - (2 - Sigma) = {worst:.2e}, violations {violations}")


def check_f_grid(cfg: _Settings) -> CheckResult:
    deltas = np.logspace(-5, 1, cfg.grid)
    thetas = np.logspace(-3, 1, cfg.grid)
    values = np.array([[tur_bound_f(th + d, th).f_value for th in thetas] for d in deltas])
    row_min = values.min(axis=1)
    ok = bool(values.min() >= 2.0 and row_min[0] - 2 <= 1e-6 and np.all(np.diff(row_min) >= -1e-12))
    return CheckResult("f_grid", ok, f"min f = {values.min():.12g} on {cfg.grid}x{cfg.grid} grid; "
                       f"min at smallest delta exceeds 2 by {row_min[0] - 2:.2e}")


def check_heat_capacity(cfg: _Settings) -> CheckResult:
    worst = 0.0
    ns = (1, 2, 10, 50) if cfg.n_max > 6 else (1, 2)
    for n in ns:
        for theta in (1e-3, 0.1, 1.0, 5.0):
            gibbs = thermo_point(subspace_spectrum(ModelSpec.linear(), SpinEnsemble(n), Fraction(n, 2), 1.0), theta)
            worst = max(worst, _rel(heat_capacity_closed_form_linear(n, theta, 1.0), gibbs.heat_capacity))
    low = max(_rel(heat_capacity_closed_form_linear(n, 1e-4, 1.0) / 1e-8, n * (n + 2) / 12) for n in ns)
    ok = worst <= 1e-9 and low <= 1e-3
    return CheckResult("heat_capacity_forms", ok,
                       f"closed form vs Gibbs sum {worst:.2e} (tol 1e-9); beta->0 limit {low:.2e} (tol 1e-3)")


def check_asymptotic_var_h(cfg: _Settings) -> CheckResult:
    n, beta = 1000, 1e-6
    worst = 0.0
    for model in (ModelSpec.linear(), ModelSpec.power(2), ModelSpec.lmg(0.7)):
        spec = subspace_spectrum(model, SpinEnsemble(n), Fraction(n, 2), 1.0)
        var = thermo_point(spec, beta).var_energy
        worst = max(worst, _rel(var, var_h_asymptotic(model, n, 1.0)))
    return CheckResult("asymptotic_var_h", worst <= 0.01, f"n=1000 var(H) vs n^2 limit {worst:.2e} (tol 1e-2)")


FAST_CHECKS: list[Callable[[_Settings], CheckResult]] = [
    check_dimensions, check_oracle_triangle, check_product_oracle, check_detailed_balance,
    check_kms, check_conservation, check_relaxation, check_tur_draws, check_f_grid, check_heat_capacity,
]
FULL_ONLY: list[Callable[[_Settings], CheckResult]] = [check_asymptotic_var_h]


def run_validation(level: str = FAST, inject_fault: str | None = None) -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; expected one of {FAULTS}")
    flip = inject_fault == "dissipator-sign"
    if level == FAST:
        cfg = _Settings(n_max=6, grid=10, draws=100, flip=flip)
        checks = FAST_CHECKS
    else:
        cfg = _Settings(n_max=12, grid=40, draws=1000, flip=flip)
        checks = FAST_CHECKS + FULL_ONLY
    return [check(cfg) for check in checks]
