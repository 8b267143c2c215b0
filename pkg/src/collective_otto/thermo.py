"""Equilibrium response of collective blocks and independent spin ensembles.

Units: hbar = k_B = 1, so the heat capacity is ``beta**2 * var(H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import LINEAR, LMG, POWERX, ModelSpec, SubspaceSpectrum
from .steady_state import BlockGibbs, BlockMixture, gibbs_block

# Below this beta*omega the csch^2 difference is replaced by its beta -> 0 limit.
SMALL_THETA = 1e-6


@dataclass(frozen=True)
class ThermoPoint:
    beta: float
    omega: float
    theta: float
    mean_energy: float
    var_energy: float
    heat_capacity: float

    @property
    def unit_variance(self) -> float:
        """``C / theta**2`` evaluated without dividing by theta (finite at beta = 0)."""
        return self.var_energy / self.omega**2


def weighted_mean_var(values: np.ndarray, probs: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(probs * values)
    var = math.fsum(probs * (values - mean) ** 2)
    return mean, max(var, 0.0)


def thermo_point(state, beta: float | None = None) -> ThermoPoint:
    """Mean energy, energy variance and heat capacity of a Gibbs block or block mixture.

    ``state`` may be a :class:`SubspaceSpectrum` (then ``beta`` is required), a
    :class:`BlockGibbs` or a :class:`BlockMixture`.
    """
    if isinstance(state, SubspaceSpectrum):
        if beta is None:
            raise ValueError("beta is required when passing a bare spectrum")
        state = gibbs_block(state, beta)
    if isinstance(state, BlockGibbs):
        energies, probs = state.spectrum.energies, state.populations
        beta, omega = state.beta, state.spectrum.omega
    elif isinstance(state, BlockMixture):
        energies, probs = state.flat()
        first = state.blocks[0][2]
        beta, omega = first.beta, first.spectrum.omega
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    mean, var = weighted_mean_var(energies, probs)
    return ThermoPoint(beta, omega, beta * omega, mean, var, beta * beta * var)


def _csch2_minus_inverse_square(y: float) -> float:
    """``csch(y)**2 - 1/y**2``, accurate for all y > 0."""
    if y < 0.05:
        y2 = y * y
        return -1 / 3 + y2 * (1 / 15 + y2 * (-2 / 189 + y2 * (7 / 4725 + y2 * (-2 / 10395))))
    if y > 20:
        e = math.exp(-2 * y)
        return 4 * e / (1 - e) ** 2 - 1 / (y * y)
    return 1 / math.sinh(y) ** 2 - 1 / (y * y)


def heat_capacity_closed_form_linear(n: int, beta: float, omega: float) -> float:
    """Heat capacity of the j = n/2 qubit block with ``H = omega * J_z``.

    ``(beta*omega)^2 / 4 * [csch^2(theta/2) - (n+1)^2 csch^2((n+1) theta/2)]``, evaluated
    as ``h(theta/2) - (n+1)^2 h((n+1) theta/2)`` with ``h(y) = csch^2(y) - 1/y^2`` so
    the ``1/y^2`` poles cancel analytically.
    """
    theta = beta * omega
    if theta < 0:
        raise ValueError("beta*omega must be nonnegative")
    if theta < SMALL_THETA:
        return n * (n + 2) / 12 * theta * theta
    n1 = n + 1
    x = theta / 2
    bracket = _csch2_minus_inverse_square(x) - n1 * n1 * _csch2_minus_inverse_square(n1 * x)
    return 0.25 * theta * theta * bracket


def var_h_asymptotic(model: ModelSpec, n: int, omega: float) -> float:
    """Leading large-n, beta -> 0 energy variance of the j = n/2 block."""
    scale = n * n * omega * omega
    if model.kind == LINEAR:
        return scale / 12
    if model.kind == POWERX:
        x = model.x
        if x % 2 == 0:
            return scale * x * x / (4**x * (2 * x + 1) * (x + 1) ** 2)
        return scale / (4**x * (2 * x + 1))
    if model.kind == LMG:
        return scale * (1 / 180 + model.gamma_lmg**2 / 12)
    raise ValueError(f"no asymptotic form for model {model.kind!r}")


def qubit_unit_variance(theta: float) -> float:
    """Variance of ``sigma_z / 2`` in a thermal qubit: ``sech^2(theta/2) / 4``."""
    e = math.exp(-abs(theta))
    return e / (1 + e) ** 2


def heat_capacity_independent(n: int, beta: float, omega: float) -> float:
    theta = beta * omega
    return n * theta * theta * qubit_unit_variance(theta)
