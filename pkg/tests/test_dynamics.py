import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collective_otto.dynamics import (
    BathSpec, ConvergenceError, build_rate_matrix, evolve_populations, kms_ratios,
    steady_state_residual, thermalization_time, trace_rows,
)
from collective_otto.spectra import ModelSpec, SpinEnsemble, subspace_spectrum
from collective_otto.steady_state import gibbs_block


def target(j, omega, beta):
    j = Fraction(j)
    return gibbs_block(subspace_spectrum(ModelSpec.linear(), SpinEnsemble(int(2 * j)), j, omega), beta)


def uniform(rates):
    return np.full(rates.size, 1 / rates.size)


def test_qubit_rates():
    r = build_rate_matrix(Fraction(1, 2), 1.0, BathSpec(0.8, base_rate=2.0))
    assert r.down.tolist() == [0.0, 2.0]
    assert r.up[0] == pytest.approx(2.0 * math.exp(-0.8), rel=1e-15) and r.up[1] == 0


def test_spin_one_middle_rates():
    r = build_rate_matrix(1, 1.0, BathSpec(1.0))
    assert r.down[1] == 2.0 and r.up[1] == pytest.approx(2 * math.exp(-1), rel=1e-15)
    assert r.down[0] == 0 and r.up[-1] == 0


def test_evolution_edge_cases():
    r = build_rate_matrix(1, 1.0, BathSpec(1.0))
    p0 = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(evolve_populations(r, p0, 0.0), p0)
    np.testing.assert_allclose(evolve_populations(r, p0, 200.0), target(1, 1.0, 1.0).populations, atol=1e-12)
    cold = build_rate_matrix(2, 1.0, BathSpec(60.0))
    assert evolve_populations(cold, uniform(cold), 50.0)[0] > 1 - 1e-12
    with pytest.raises(ValueError):
        evolve_populations(r, np.array([0.5, 0.5, 0.5]), 1.0)


def test_residual_zero_cases():
    t = target(1, 1.0, 1.0)
    assert steady_state_residual(t.populations, t) == 0
    r = build_rate_matrix(1, 1.0, BathSpec(0.0))
    assert steady_state_residual(uniform(r), target(1, 1.0, 0.0)) < 1e-16


def test_relaxation_at_fifty_over_gamma():
    r = build_rate_matrix(1, 1.0, BathSpec(1.0))
    assert steady_state_residual(evolve_populations(r, uniform(r), 50.0), target(1, 1.0, 1.0)) < 1e-8


def test_qubit_gap_is_analytic():
    beta = 0.9
    r = build_rate_matrix(Fraction(1, 2), 1.0, BathSpec(beta))
    assert r.spectral_gap() == pytest.approx(1 + math.exp(-beta), abs=1e-8)


def test_thermalization_monotone_in_epsilon():
    r = build_rate_matrix(2, 1.0, BathSpec(1.0))
    t = target(2, 1.0, 1.0)
    times = [thermalization_time(r, uniform(r), t, eps).time for eps in (1e-3, 1e-6, 1e-9)]
    assert times[0] < times[1] < times[2]


def test_gap_comparison_is_reported():
    small = build_rate_matrix(1, 1.0, BathSpec(1.0)).spectral_gap()
    large = build_rate_matrix(10, 1.0, BathSpec(1.0)).spectral_gap()
    assert small > 0 and large > 0 and math.isfinite(large)


def test_time_cap():
    r = build_rate_matrix(1, 1.0, BathSpec(1.0, base_rate=1e-9))
    with pytest.raises(ConvergenceError):
        thermalization_time(r, uniform(r), target(1, 1.0, 1.0), 1e-8, t_cap=10)


def test_rejects_nonlinear_model_and_inactive_bath():
    with pytest.raises(ValueError):
        build_rate_matrix(1, 1.0, BathSpec(1.0), model=ModelSpec.lmg(0.7))
    with pytest.raises(ValueError):
        build_rate_matrix(1, 1.0, BathSpec(1.0, active=False))


@settings(deadline=None)
@given(two_j=st.integers(1, 30), beta=st.floats(0, 6), omega=st.floats(0.05, 3))
def test_generator_invariants(two_j, beta, omega):
    r = build_rate_matrix(Fraction(two_j, 2), omega, BathSpec(beta))
    gen = r.generator()
    scale = np.abs(gen).max()
    assert np.abs(gen.sum(axis=0)).max() <= 1e-14 * max(1, scale)
    p = target(Fraction(two_j, 2), omega, beta).populations
    assert np.abs(gen @ p).max() <= 1e-12 * scale
    np.testing.assert_allclose(kms_ratios(r), math.exp(beta * omega), rtol=1e-12)
    assert np.count_nonzero(np.triu(gen, 2)) == 0 and np.count_nonzero(np.tril(gen, -2)) == 0


def test_flipped_orientation_breaks_detailed_balance():
    r = build_rate_matrix(1, 1.0, BathSpec(1.0), flip_orientation=True)
    p = evolve_populations(r, uniform(r), 200.0)
    np.testing.assert_allclose(p, target(1, 1.0, 1.0).populations[::-1], atol=1e-10)


@pytest.mark.parametrize("n", range(1, 11))
def test_uniform_relaxes_to_gibbs(n):
    j = Fraction(n, 2)
    r = build_rate_matrix(j, 1.0, BathSpec(1.0))
    res = thermalization_time(r, uniform(r), target(j, 1.0, 1.0), 1e-8)
    assert res.residual < 1e-8
    path = trace_rows(r, uniform(r), np.linspace(0, res.time, 25))
    assert min(pop for _, _, pop in path) >= -1e-12


def test_trace_rows_layout():
    r = build_rate_matrix(Fraction(1, 2), 1.0, BathSpec(1.0))
    rows = trace_rows(r, uniform(r), [0.0, 1.0])
    assert [(t, m) for t, m, _ in rows] == [(0.0, -0.5), (0.0, 0.5), (1.0, -0.5), (1.0, 0.5)]
