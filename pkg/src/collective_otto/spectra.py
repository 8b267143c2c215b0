"""Collective angular-momentum blocks and working-medium spectra.

Angular momenta are carried as *twice* their value (``two_j``, ``two_m``) so
that level identity never depends on floating-point comparison. Energies are
always ``omega * g_m`` where ``g_m`` is the dimensionless unit spectrum of the
model, evaluated from exact integers and rounded once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

LINEAR = "linear"
POWERX = "powerx"
LMG = "lmg"
MODEL_KINDS = (LINEAR, POWERX, LMG)


def twice(value) -> int:
    """Return ``2*value`` as an int, rejecting anything that is not a half-integer."""
    if isinstance(value, (int, Fraction)):
        doubled = Fraction(value) * 2
        if doubled.denominator != 1:
            raise ValueError(f"{value} is not a half-integer")
        return int(doubled)
    if isinstance(value, Real):
        doubled = 2.0 * float(value)
        rounded = round(doubled)
        if not math.isfinite(doubled) or abs(doubled - rounded) > 1e-9:
            raise ValueError(f"{value} is not a half-integer")
        return int(rounded)
    raise TypeError(f"cannot interpret {value!r} as a half-integer")


def half(two_value: int) -> Fraction:
    return Fraction(two_value, 2)


@dataclass(frozen=True)
class ModelSpec:
    """Working-medium Hamiltonian family ``H = omega * G``."""

    kind: str = LINEAR
    x: int = 1
    gamma_lmg: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == POWERX and (not isinstance(self.x, int) or self.x < 1):
            raise ValueError(f"PowerX exponent must be an integer >= 1, got {self.x!r}")
        if not math.isfinite(self.gamma_lmg):
            raise ValueError("gamma_lmg must be finite")

    @classmethod
    def linear(cls) -> "ModelSpec":
        return cls(LINEAR)

    @classmethod
    def power(cls, x: int) -> "ModelSpec":
        return cls(POWERX, x=x)

    @classmethod
    def lmg(cls, gamma: float) -> "ModelSpec":
        return cls(LMG, gamma_lmg=float(gamma))

    @property
    def label(self) -> str:
        if self.kind == POWERX:
            return f"x{self.x}"
        if self.kind == LMG:
            return f"lmg(gamma={self.gamma_lmg:g})"
        return "linear"


@dataclass(frozen=True)
class SpinEnsemble:
    """``n`` identical spin-``s`` particles; ``s`` stored as ``two_s``."""

    n: int
    two_s: int = 1

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.two_s, int) or self.two_s < 1:
            raise ValueError(f"spin must be a positive half-integer, got two_s={self.two_s!r}")

    @classmethod
    def of(cls, n: int, s=Fraction(1, 2)) -> "SpinEnsemble":
        return cls(n, twice(s))

    @property
    def s(self) -> Fraction:
        return half(self.two_s)

    @property
    def two_j_max(self) -> int:
        return self.n * self.two_s

    @property
    def is_qubit(self) -> bool:
        return self.two_s == 1

    @property
    def dimension(self) -> int:
        return (self.two_s + 1) ** self.n


@dataclass(frozen=True)
class SubspaceSpectrum:
    """Levels of one spin-``j`` block at frequency ``omega``, ordered by increasing ``m``."""

    two_j: int
    omega: float
    two_m: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)

    @property
    def j(self) -> Fraction:
        return half(self.two_j)

    @property
    def size(self) -> int:
        return self.two_j + 1

    @property
    def m(self) -> np.ndarray:
        return self.two_m / 2.0

    @property
    def unit_energies(self) -> np.ndarray:
        return self.energies / self.omega

    @property
    def levels(self) -> list[tuple[Fraction, float]]:
        return [(half(int(tm)), float(e)) for tm, e in zip(self.two_m, self.energies)]


def multiplicity(n: int, j) -> int:
    """Number of spin-``j`` blocks in ``n`` qubits (exact integer).

    Uses ``l_j = C(n, n/2 - j) - C(n, n/2 - j - 1)``, which equals
    ``(2j+1) n! / ((n/2+j+1)! (n/2-j)!)`` and never overflows.
    """
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    two_j = twice(j)
    if two_j < 0 or two_j > n:
        raise ValueError(f"j={half(two_j)} outside [0, n/2] for n={n}")
    if (n - two_j) % 2:
        raise ValueError(f"j={half(two_j)} has the wrong parity for n={n}")
    k = (n - two_j) // 2
    return math.comb(n, k) - (math.comb(n, k - 1) if k > 0 else 0)


def allowed_two_j(ensemble: SpinEnsemble) -> list[int]:
    """Twice the allowed total-spin values, ascending."""
    top = ensemble.two_j_max
    if ensemble.n == 1:
        return [top]
    return list(range(top % 2, top + 1, 2))


def allowed_j(ensemble: SpinEnsemble) -> list[Fraction]:
    """Allowed total spins ``j0 .. ns`` in unit steps, ascending."""
    return [half(t) for t in allowed_two_j(ensemble)]


def unit_energy(model: ModelSpec, n: int, two_j: int, two_m: int) -> float:
    """Dimensionless energy ``g_m`` (``epsilon_m = omega * g_m``), exact up to one rounding."""
    if model.kind == LINEAR:
        return two_m / 2
    if model.kind == POWERX:
        x = model.x
        # n (m/n)^x = (2m)^x / (2^x n^(x-1)); int/int division rounds once
        return two_m**x / (2**x * n ** (x - 1))
    casimir_minus_m2 = two_j * (two_j + 2) - two_m * two_m  # 4 (j(j+1) - m^2)
    return casimir_minus_m2 / (4 * n) + model.gamma_lmg * (two_m / 2)


def unit_spectrum(model: ModelSpec, ensemble: SpinEnsemble, two_j: int) -> np.ndarray:
    if two_j not in allowed_two_j(ensemble):
        raise ValueError(f"j={half(two_j)} not allowed for n={ensemble.n}, s={ensemble.s}")
    if model.kind == LMG and two_j != ensemble.two_j_max:
        raise ValueError("LMG spectra are only defined in the maximal j = ns block")
    n = ensemble.n
    return np.array([unit_energy(model, n, two_j, tm) for tm in range(-two_j, two_j + 1, 2)], dtype=float)


def subspace_spectrum(model: ModelSpec, ensemble: SpinEnsemble, j, omega: float) -> SubspaceSpectrum:
    """Energy levels ``epsilon_m`` of block ``j`` for ``m = -j .. j``."""
    if not (omega > 0) or not math.isfinite(omega):
        raise ValueError(f"omega must be positive and finite, got {omega!r}")
    two_j = twice(j)
    g = unit_spectrum(model, ensemble, two_j)
    two_m = np.arange(-two_j, two_j + 1, 2)
    return SubspaceSpectrum(two_j, float(omega), two_m, omega * g)


def dimension_check(ensemble: SpinEnsemble) -> bool:
    """True iff the qubit block multiplicities account for all ``2^n`` states."""
    if not ensemble.is_qubit:
        raise ValueError("multiplicities are only available for s = 1/2")
    total = sum(multiplicity(ensemble.n, half(t)) * (t + 1) for t in allowed_two_j(ensemble))
    return total == 2**ensemble.n
