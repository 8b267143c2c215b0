"""Steady states of the working medium at the end of a thermalization stroke."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .spectra import (
    ModelSpec,
    SpinEnsemble,
    SubspaceSpectrum,
    allowed_two_j,
    half,
    multiplicity,
    subspace_spectrum,
    twice,
)

SYMMETRIC = "symmetric"
UNIFORM_PRODUCT = "uniform_product"
WEIGHT_PRESETS = (SYMMETRIC, UNIFORM_PRODUCT)


def check_beta(beta: float) -> float:
    beta = float(beta)
    if math.isnan(beta) or not math.isfinite(beta):
        raise ValueError(f"inverse temperature must be finite, got {beta!r}")
    if beta < 0:
        raise ValueError(f"negative temperatures are not supported (beta={beta})")
    return beta


def boltzmann(energies: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Normalized Boltzmann weights and ``log Z``, shifted by the ground energy."""
    e0 = float(np.min(energies))
    w = np.exp(-beta * (energies - e0))
    total = math.fsum(w)
    return w / total, math.log(total) - beta * e0


@dataclass(frozen=True)
class BlockGibbs:
    spectrum: SubspaceSpectrum
    beta: float
    populations: np.ndarray = field(repr=False)
    log_partition: float

    @property
    def partition_function(self) -> float:
        return math.exp(self.log_partition)

    def population(self, m) -> float:
        idx = (twice(m) + self.spectrum.two_j) // 2
        return float(self.populations[idx])


def gibbs_block(spectrum: SubspaceSpectrum, beta: float) -> BlockGibbs:
    beta = check_beta(beta)
    pops, log_z = boltzmann(spectrum.energies, beta)
    return BlockGibbs(spectrum, beta, pops, log_z)


@dataclass(frozen=True)
class BlockMixture:
    """Block-diagonal state: ``sum_j P_j * Gibbs_j``."""

    blocks: tuple[tuple[int, float, BlockGibbs], ...]  # (two_j, weight, gibbs)

    @property
    def weights(self) -> dict[Fraction, float]:
        return {half(tj): w for tj, w, _ in self.blocks}

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Energies and absolute probabilities of every level of every block."""
        energies = np.concatenate([g.spectrum.energies for _, _, g in self.blocks])
        probs = np.concatenate([w * g.populations for _, w, g in self.blocks])
        return energies, probs


def normalize_weights(ensemble: SpinEnsemble, weights: Mapping) -> dict[int, float]:
    """Validate a ``j -> P_j`` map and return it keyed by ``two_j``."""
    allowed = set(allowed_two_j(ensemble))
    out: dict[int, float] = {}
    for j, w in weights.items():
        tj = twice(j)
        if tj not in allowed:
            raise ValueError(f"weight on disallowed j={half(tj)} for n={ensemble.n}")
        w = float(w)
        if not (w >= 0) or not math.isfinite(w):
            raise ValueError(f"block weight for j={half(tj)} must be nonnegative, got {w}")
        out[tj] = out.get(tj, 0.0) + w
    total = math.fsum(out.values())
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"block weights sum to {total!r}, expected 1")
    return {tj: w for tj, w in sorted(out.items()) if w > 0}


def symmetric_weights(ensemble: SpinEnsemble) -> dict[Fraction, float]:
    return {half(ensemble.two_j_max): 1.0}


def dicke_weights_from_uniform_product(ensemble: SpinEnsemble) -> dict[Fraction, float]:
    """Block weights ``l_j (2j+1) / 2^n`` induced by the maximally mixed state."""
    if not ensemble.is_qubit:
        raise ValueError("uniform-product weights need the s = 1/2 multiplicities")
    n = ensemble.n
    return {half(tj): multiplicity(n, half(tj)) * (tj + 1) / 2**n for tj in allowed_two_j(ensemble)}


def weights_preset(name: str, ensemble: SpinEnsemble) -> dict[Fraction, float]:
    if name == SYMMETRIC:
        return symmetric_weights(ensemble)
    if name == UNIFORM_PRODUCT:
        return dicke_weights_from_uniform_product(ensemble)
    raise ValueError(f"unknown weights preset {name!r}; expected one of {WEIGHT_PRESETS}")


def collective_steady_state(
    model: ModelSpec,
    ensemble: SpinEnsemble,
    beta: float,
    omega: float,
    weights: Mapping | None = None,
) -> BlockMixture:
    """Gibbs state within each populated block, mixed with the block weights."""
    if weights is None:
        weights = symmetric_weights(ensemble)
    norm = normalize_weights(ensemble, weights)
    blocks = tuple(
        (tj, w, gibbs_block(subspace_spectrum(model, ensemble, half(tj), omega), beta))
        for tj, w in norm.items()
    )
    return BlockMixture(blocks)


@dataclass(frozen=True)
class QubitThermal:
    beta: float
    omega: float
    excited_population: float

    @property
    def ground_population(self) -> float:
        return 1.0 - self.excited_population


def independent_qubit_state(beta: float, omega: float) -> QubitThermal:
    beta = check_beta(beta)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    # e^{-x/2} / (2 cosh(x/2)) == 1 / (1 + e^x)
    theta = beta * omega
    p_up = math.exp(-theta) / (1.0 + math.exp(-theta)) if theta > 0 else 0.5
    return QubitThermal(beta, float(omega), p_up)
