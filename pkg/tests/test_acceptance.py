"""Acceptance criteria, each run at its stated tolerance; see the summary section of the pytest report."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from collective_otto.dynamics import BathSpec, build_rate_matrix, kms_ratios, thermalization_time
from collective_otto.metrics import engine_metrics, tur_bound_f, tur_check
from collective_otto.spectra import ModelSpec, SpinEnsemble, subspace_spectrum
from collective_otto.steady_state import gibbs_block
from collective_otto.sweep import SweepPlan, carnot_closure, contour_crossings, fit_scaling, ok_rows, run_sweep
from collective_otto.thermo import heat_capacity_closed_form_linear, thermo_point, var_h_asymptotic
from collective_otto.validate import run_validation
from collective_otto.work_stats import (
    INDEPENDENT, CycleParams, characteristic_function, cycle_moments,
    independent_characteristic_function, joint_distribution, moments, moments_from_characteristic,
)

OMEGA_C, OMEGA_H, BETA_H, DELTA = 0.1, 0.5, 1e-6, 0.005
LIN = ModelSpec.linear()
MODELS = {"linear": LIN, "x2": ModelSpec.power(2), "lmg": ModelSpec.lmg(0.7)}


def ref_cycle(n, model=LIN, coupling="collective", beta_h=BETA_H):
    return carnot_closure(OMEGA_C, OMEGA_H, beta_h, DELTA, model, SpinEnsemble(n), coupling)


def rel(a, b):
    return abs(a - b) / abs(b)


def moment_error(a, b):
    return max(rel(getattr(a, k), getattr(b, k)) for k in ("mean_w", "var_w", "mean_qh", "mean_wq"))


def test_1_oracle_triangle(criterion):
    start = time.perf_counter()
    worst = 0.0
    for n in range(1, 7):
        col = ref_cycle(n)
        enum = moments(joint_distribution(col))
        fd = moments_from_characteristic(lambda a, b: characteristic_function(col, a, b))
        worst = max(worst, moment_error(fd, enum))
        ind = ref_cycle(n, coupling=INDEPENDENT)
        fd_ind = moments_from_characteristic(lambda a, b: independent_characteristic_function(ind, a, b))
        worst = max(worst, moment_error(fd_ind, cycle_moments(ind)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 10
    criterion("1 oracle triangle", ok, f"max rel error {worst:.2e} (tol 1e-6), {elapsed:.2f}s (< 10s)")
    assert ok


def test_2_heat_capacity_forms(criterion):
    worst = 0.0
    for n in (1, 2, 10, 50):
        spec = subspace_spectrum(LIN, SpinEnsemble(n), Fraction(n, 2), 1.0)
        for theta in (1e-3, 0.1, 1.0, 5.0):
            worst = max(worst, rel(heat_capacity_closed_form_linear(n, theta, 1.0),
                                   thermo_point(spec, theta).heat_capacity))
    limit = max(rel(heat_capacity_closed_form_linear(n, 1e-4, 1.0) / 1e-8, n * (n + 2) / 12)
                for n in (1, 2, 10, 50))
    ok = worst <= 1e-9 and limit <= 1e-3
    criterion("2 heat capacity", ok, f"closed form vs Gibbs {worst:.2e} (tol 1e-9), "
              f"beta->0 limit {limit:.2e} (tol 1e-3)")
    assert ok


def test_3_asymptotic_var_h(criterion):
    start = time.perf_counter()
    n, beta = 1000, 1e-6
    errors = {}
    for name, model in MODELS.items():
        spec = subspace_spectrum(model, SpinEnsemble(n), Fraction(n, 2), 1.0)
        errors[name] = rel(thermo_point(spec, beta).var_energy, var_h_asymptotic(model, n, 1.0))
    elapsed = time.perf_counter() - start
    assert var_h_asymptotic(MODELS["lmg"], 1, 1.0) == pytest.approx(0.0463889, abs=1e-7)
    ok = max(errors.values()) <= 0.01 and elapsed < 5
    detail = ", ".join(f"{k} {v:.2e}" for k, v in errors.items())
    criterion("3 asymptotic var(H)", ok, f"{detail} (tol 1e-2), {elapsed:.2f}s (< 5s)")
    assert ok


@pytest.mark.parametrize("name", list(MODELS))
def test_4_scaling_exponents(criterion, name):
    start = time.perf_counter()
    rows = run_sweep(SweepPlan(ref_cycle(10, MODELS[name]), ("n", tuple(range(10, 101)))))
    slopes = {q: fit_scaling(rows, q).exponent for q in ("col_work_variance", "col_work_extracted", "lambda_r")}
    elapsed = time.perf_counter() - start
    targets = {"col_work_variance": 2.0, "col_work_extracted": 2.0, "lambda_r": 1.0}
    ok = all(abs(slopes[q] - targets[q]) <= 0.05 for q in targets) and elapsed < 60
    detail = (f"var(W) {slopes['col_work_variance']:.4f}, |<W>| {slopes['col_work_extracted']:.4f} "
              f"(target 2 +- 0.05), lambda_r {slopes['lambda_r']:.4f} (target 1 +- 0.05), {elapsed:.1f}s")
    criterion(f"4 scaling exponents [{name}]", ok, detail)
    assert ok


def test_5_lambda_r_limit(criterion):
    errors = {}
    for n in (10, 20, 50):
        col = engine_metrics(cycle_moments(ref_cycle(n)), ref_cycle(n))
        ind = engine_metrics(cycle_moments(ref_cycle(n, coupling=INDEPENDENT)), ref_cycle(n, coupling=INDEPENDENT))
        errors[n] = rel(col.reliability**2 / ind.reliability**2, (n + 2) / 3)
    ok = max(errors.values()) <= 0.05
    criterion("5 lambda_r limit", ok, ", ".join(f"n={n} {e:.2e}" for n, e in errors.items()) + " (tol 5e-2)")
    assert ok


def _random_engine(rng):
    model = list(MODELS.values())[rng.integers(3)]
    n = int(rng.integers(1, 51))
    omega_h = float(rng.uniform(0.2, 2.0))
    omega_c = omega_h * float(rng.uniform(0.05, 0.95))
    theta_h = float(10 ** rng.uniform(-4, 0.5))
    delta = float(10 ** rng.uniform(-3, 0.5))
    return CycleParams(model, SpinEnsemble(n), omega_c, omega_h, (theta_h + delta) / omega_c, theta_h / omega_h)


def test_6_tur_suite(criterion):
    rng = np.random.default_rng(6)
    draws, violations, worst = 0, 0, math.inf
    while draws < 1000:
        p = _random_engine(rng)
        m = engine_metrics(cycle_moments(p), p)
        if m.degenerate:  # x=2 at n=1: no work fluctuations
            continue
        draws += 1
        worst = min(worst, m.uncertainty_q - m.tur_rhs_collective)
        violations += not tur_check(m).collective_bound

    standard = []
    for n in (20, 40, 60):
        for theta_h in (0.05, 0.02, 0.01, 1e-3, 1e-6):
            p = ref_cycle(n, beta_h=theta_h / OMEGA_H)
            m = engine_metrics(cycle_moments(p), p)
            if m.uncertainty_q < 2 and tur_check(m).collective_bound:
                standard.append((n, theta_h, m.uncertainty_q))

    q1 = engine_metrics(cycle_moments(ref_cycle(1, coupling=INDEPENDENT, beta_h=0.4)),
                        ref_cycle(1, coupling=INDEPENDENT, beta_h=0.4)).uncertainty_q
    drift = max(abs(engine_metrics(cycle_moments(ref_cycle(n, coupling=INDEPENDENT, beta_h=0.4)),
                                   ref_cycle(n, coupling=INDEPENDENT, beta_h=0.4)).uncertainty_q - q1)
                for n in range(1, 101))

    deltas = np.geomspace(5, 1e-3, 40)
    thetas = np.geomspace(0.01, 20, 80)
    mins = np.array([min(tur_bound_f(t + d, t).f_value for t in thetas) for d in deltas])
    f_ok = mins.min() >= 2 and np.all(np.diff(mins) <= 0) and mins[-1] - 2 < 1e-6

    ok = violations == 0 and bool(standard) and drift <= 1e-10 and f_ok
    criterion("6 TUR suite", ok,
              f"{draws} draws, {violations} violations (min margin {worst:.2e}); "
              f"{len(standard)} standard-TUR violation points; Q_ind drift {drift:.1e} (tol 1e-10); "
              f"min f {mins.min():.10f}, at delta=1e-3 exceeds 2 by {mins[-1] - 2:.1e}")
    assert ok


def test_7_dynamics(criterion):
    worst_tv, worst_kms = 0.0, 0.0
    for n in range(1, 11):
        j = Fraction(n, 2)
        for beta in (0.5, 1.0, 3.0):
            rates = build_rate_matrix(j, 1.0, BathSpec(beta))
            target = gibbs_block(subspace_spectrum(LIN, SpinEnsemble(n), j, 1.0), beta)
            p0 = np.full(rates.size, 1 / rates.size)
            worst_tv = max(worst_tv, thermalization_time(rates, p0, target, 1e-8).residual)
            worst_kms = max(worst_kms, float(np.max(np.abs(kms_ratios(rates) / math.exp(beta) - 1))))
    mutant = {r.name: r.passed for r in run_validation("fast", "dissipator-sign")}
    ok = worst_tv < 1e-8 and worst_kms <= 1e-12 and not mutant["detailed_balance"]
    criterion("7 dynamics", ok, f"TV {worst_tv:.2e} (< 1e-8), KMS {worst_kms:.1e} (tol 1e-12), "
              f"mutant detailed balance {'fails' if not mutant['detailed_balance'] else 'PASSES'}")
    assert ok


def test_8_contour_maps(criterion):
    # the (n, T_h) maps are for the x = 1 model
    t_h = tuple(np.logspace(-1, 4, 21))
    rows = run_sweep(SweepPlan(ref_cycle(2), ("n", tuple(range(2, 61))), ("T_h", t_h)), threads=4)
    good = ok_rows(rows)
    lam_contour = contour_crossings(rows, "lambda_r", 1.0)
    q_contour = contour_crossings(rows, "col_uncertainty_q", 2.0)
    bad = []
    for n in range(10, 61):
        lam = [r["lambda_r"] for r in good if r["n"] == n]
        if any(b < a for a, b in zip(lam, lam[1:])):
            bad.append(n)
    ok = bool(lam_contour) and bool(q_contour) and not bad and len(good) == len(rows)
    criterion("8 contour maps", ok,
              f"{len(good)}/{len(rows)} ok rows, lambda_r=1 crossings {len(lam_contour)}, "
              f"Q=2 crossings {len(q_contour)}, non-monotone n {bad or 'none'}")
    assert ok
