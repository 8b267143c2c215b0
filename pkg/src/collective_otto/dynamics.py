"""Population dynamics of one j block under the collective thermal dissipator.

Only the linear model ``H = omega J_z`` is supported: its ladder gaps are all
equal to ``omega``, so a single bath frequency drives every transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, expm

from .spectra import LINEAR, ModelSpec, half, twice
from .steady_state import BlockGibbs, check_beta


class IntegrationError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BathSpec:
    """Flat spectral function: ``Gamma(nu) = base_rate`` for ``nu > 0``, KMS-completed below."""

    beta: float
    base_rate: float = 1.0
    active: bool = True

    def __post_init__(self):
        check_beta(self.beta)
        if not self.base_rate > 0:
            raise ValueError("base_rate must be positive")

    def spectral(self, nu: float) -> float:
        if nu >= 0:
            return self.base_rate
        return self.base_rate * math.exp(self.beta * nu)


@dataclass(frozen=True)
class RateMatrix:
    two_j: int
    omega: float
    down: np.ndarray = field(repr=False)  # down[i]: rate from level i to i-1 (m ascending)
    up: np.ndarray = field(repr=False)  # up[i]: rate from level i to i+1

    @property
    def j(self):
        return half(self.two_j)

    @property
    def size(self) -> int:
        return self.two_j + 1

    def generator(self) -> np.ndarray:
        """``dp/dt = G p`` with ``G[f, i]`` the rate i -> f; columns sum to zero."""
        d = self.size
        gen = np.zeros((d, d))
        idx = np.arange(d)
        gen[idx[1:] - 1, idx[1:]] = self.down[1:]
        gen[idx[:-1] + 1, idx[:-1]] = self.up[:-1]
        gen[idx, idx] = -(self.down + self.up)
        return gen

    def spectral_gap(self) -> float:
        """Smallest nonzero relaxation rate, from the symmetrized (detailed-balance) generator."""
        if self.size == 1:
            return math.inf
        diag = -(self.down + self.up)
        off = np.sqrt(self.up[:-1] * self.down[1:])
        eig = np.sort(eigvalsh_tridiagonal(diag, off))
        return float(-eig[-2])


def build_rate_matrix(j, omega: float, bath: BathSpec, model: ModelSpec | None = None,
                      flip_orientation: bool = False) -> RateMatrix:
    """Population rates of ``Gamma(w) D[J+] + Gamma(-w) D[J-]``.

    ``D[O]`` has ``O^dagger`` as its jump operator, so the ``Gamma(w)`` term lowers m.
    ``flip_orientation`` swaps the two jump operators; it exists only so validation
    can confirm that the detailed-balance check catches the wrong orientation.
    """
    if model is not None and model.kind != LINEAR:
        raise ValueError("rate equations are only defined for the linear model")
    if not bath.active:
        raise ValueError("bath is not coupled")
    if not omega > 0:
        raise ValueError("omega must be positive")
    two_j = twice(j)
    two_m = np.arange(-two_j, two_j + 1, 2)
    casimir = two_j * (two_j + 2)
    lower = (casimir - two_m * (two_m - 2)) / 4  # |<m-1|J-|m>|^2
    raise_ = (casimir - two_m * (two_m + 2)) / 4  # |<m+1|J+|m>|^2
    emit, absorb = bath.spectral(omega), bath.spectral(-omega)
    if flip_orientation:
        emit, absorb = absorb, emit
    return RateMatrix(two_j, float(omega), emit * lower, absorb * raise_)


def kms_ratios(rates: RateMatrix) -> np.ndarray:
    """``rate(m+1 -> m) / rate(m -> m+1)`` for every adjacent pair."""
    return rates.down[1:] / rates.up[:-1]


def evolve_populations(rates: RateMatrix, p0, t: float) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (rates.size,):
        raise ValueError(f"expected {rates.size} populations, got shape {p0.shape}")
    if abs(math.fsum(p0) - 1.0) > 1e-10:
        raise ValueError("initial populations must be normalized")
    if t < 0:
        raise ValueError("duration must be nonnegative")
    if t == 0:
        return p0.copy()
    p = expm(rates.generator() * t) @ p0
    if not np.all(np.isfinite(p)):
        raise IntegrationError(f"matrix exponential failed at t={t}")
    if np.min(p) < -1e-12 or abs(math.fsum(p) - 1.0) > 1e-10:
        raise IntegrationError(f"evolution lost positivity or normalization at t={t}")
    return p


def steady_state_residual(p, target: BlockGibbs) -> float:
    """Total-variation distance to the target populations."""
    p = np.asarray(p, dtype=float)
    if p.shape != target.populations.shape:
        raise ValueError("population vector does not match the target block")
    return 0.5 * math.fsum(np.abs(p - target.populations))


@dataclass(frozen=True)
class Thermalization:
    time: float
    residual: float
    spectral_gap: float


def thermalization_time(rates: RateMatrix, p0, target: BlockGibbs, epsilon: float,
                        t_cap: float = 1e6, rtol: float = 1e-6) -> Thermalization:
    """Earliest time the TV distance to ``target`` falls below ``epsilon``.

    The TV distance to a stationary state never increases, so bracketing by
    doubling and then bisecting is sound.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    gap = rates.spectral_gap()

    def residual(t):
        return steady_state_residual(evolve_populations(rates, p0, t), target)

    if residual(0.0) < epsilon:
        return Thermalization(0.0, residual(0.0), gap)
    hi = 1.0 / (rates.down.max() + rates.up.max())
    while residual(hi) >= epsilon:
        hi *= 2
        if hi > t_cap:
            raise ConvergenceError(f"residual still >= {epsilon} at t={t_cap}")
    lo = hi / 2 if hi > 1.0 / (rates.down.max() + rates.up.max()) else 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if residual(mid) < epsilon:
            hi = mid
        else:
            lo = mid
    return Thermalization(hi, residual(hi), gap)


def trace_rows(rates: RateMatrix, p0, times) -> list[tuple[float, float, float]]:
    """``(t, m, population)`` rows for plotting relaxation curves."""
    m_values = [tm / 2 for tm in range(-rates.two_j, rates.two_j + 1, 2)]
    rows = []
    for t in times:
        p = evolve_populations(rates, p0, float(t))
        rows.extend((float(t), m, float(pi)) for m, pi in zip(m_values, p))
    return rows
