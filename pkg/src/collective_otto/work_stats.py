"""Two-point-measurement work and heat statistics of one Otto cycle.

Sign convention: ``W`` is the work done *on* the working medium (``W = W1 + W2``),
so an engine has ``<W> < 0``; ``Q_h`` is the heat drawn from the hot bath.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .spectra import LINEAR, ModelSpec, SpinEnsemble, half, unit_spectrum
from .steady_state import boltzmann, check_beta, normalize_weights

COLLECTIVE = "collective"
INDEPENDENT = "independent"
COUPLINGS = (COLLECTIVE, INDEPENDENT)

PRODUCT_ORACLE_MAX_N = 12
MERGE_RTOL = 1e-9


@dataclass(frozen=True)
class CycleParams:
    model: ModelSpec
    ensemble: SpinEnsemble
    omega_c: float
    omega_h: float
    beta_c: float
    beta_h: float
    coupling: str = COLLECTIVE
    weights: tuple[tuple[int, float], ...] | None = None  # (two_j, P_j); None -> j = ns only

    def __post_init__(self):
        for name in ("omega_c", "omega_h"):
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("beta_c", "beta_h"):
            try:
                check_beta(getattr(self, name))
            except ValueError as exc:
                raise ValueError(f"{name}: {exc}") from None
        if self.omega_c > self.omega_h:
            raise ValueError(f"omega_c={self.omega_c} must not exceed omega_h={self.omega_h}")
        if self.beta_c < self.beta_h:
            raise ValueError(f"beta_c={self.beta_c} must not be below beta_h={self.beta_h}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.coupling == INDEPENDENT:
            if self.model.kind != LINEAR or not self.ensemble.is_qubit:
                raise ValueError("independent coupling is defined for the linear qubit working medium")
            if self.weights is not None:
                raise ValueError("block weights only apply to collective coupling")
        elif self.weights is not None:
            normalize_weights(self.ensemble, {half(tj): w for tj, w in self.weights})

    @classmethod
    def make(cls, model, ensemble, omega_c, omega_h, beta_c, beta_h, coupling=COLLECTIVE,
             weights: Mapping | None = None) -> "CycleParams":
        packed = None
        if weights is not None:
            norm = normalize_weights(ensemble, weights)
            if list(norm) != [ensemble.two_j_max]:
                packed = tuple(norm.items())
        return cls(model, ensemble, float(omega_c), float(omega_h), float(beta_c), float(beta_h),
                   coupling, packed)

    @property
    def theta_c(self) -> float:
        return self.beta_c * self.omega_c

    @property
    def theta_h(self) -> float:
        return self.beta_h * self.omega_h

    @property
    def delta(self) -> float:
        return self.theta_c - self.theta_h

    @property
    def eta(self) -> float:
        return 1.0 - self.omega_c / self.omega_h

    @property
    def eta_carnot(self) -> float:
        return 1.0 - self.beta_h / self.beta_c if self.beta_c > 0 else 0.0

    @property
    def delta_eta(self) -> float:
        return self.delta / (self.beta_c * self.omega_h) if self.beta_c > 0 else 0.0

    @property
    def is_engine(self) -> bool:
        return self.omega_c < self.omega_h and self.beta_c > self.beta_h and self.delta > 0

    @property
    def is_degenerate(self) -> bool:
        return self.omega_c == self.omega_h or self.delta == 0

    def block_weights(self) -> dict[int, float]:
        if self.weights is None:
            return {self.ensemble.two_j_max: 1.0}
        return dict(self.weights)

    def single_spin(self) -> "CycleParams":
        return replace(self, ensemble=SpinEnsemble(1, self.ensemble.two_s), weights=None)

    def independent_baseline(self) -> "CycleParams":
        """Same baths and frequencies, n independent qubits with ``H = omega * J_z``."""
        return CycleParams(ModelSpec.linear(), SpinEnsemble(self.ensemble.n, 1), self.omega_c,
                           self.omega_h, self.beta_c, self.beta_h, INDEPENDENT, None)


@dataclass(frozen=True)
class Moments:
    mean_w: float
    mean_w2: float
    var_w: float
    mean_qh: float
    mean_qh2: float
    mean_wq: float

    @property
    def mean_qc(self) -> float:
        """Cold-bath heat from first-law closure of the cycle averages."""
        return -self.mean_w - self.mean_qh

    @property
    def var_qh(self) -> float:
        return self.mean_qh2 - self.mean_qh**2

    @property
    def cov_wq(self) -> float:
        return self.mean_wq - self.mean_w * self.mean_qh

    def as_dict(self) -> dict[str, float]:
        return {
            "mean_w": self.mean_w,
            "mean_w2": self.mean_w2,
            "var_w": self.var_w,
            "mean_qh": self.mean_qh,
            "mean_qh2": self.mean_qh2,
            "mean_wq": self.mean_wq,
        }


@dataclass(frozen=True)
class WorkHeatDistribution:
    """Atoms ``(w, q_h, p)``; ``keys[:, :]`` is the generating (two_j, i, k) triple."""

    w: np.ndarray = field(repr=False)
    q_h: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    keys: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.p)

    @property
    def total(self) -> float:
        return math.fsum(self.p)

    def merged(self, rtol: float = MERGE_RTOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exported view with atoms of equal ``(w, q_h)`` (within ``rtol``) combined.

        Atoms are put in exact key order before the value sort, so the result does
        not depend on how they were generated.
        """
        base = np.lexsort(self.keys.T[::-1])
        w, q, p = self.w[base], self.q_h[base], self.p[base]
        scale = max(float(np.max(np.abs(w), initial=0.0)), float(np.max(np.abs(q), initial=0.0)))
        tol = rtol * scale
        out_w, out_q, out_p = [], [], []
        for w_group in _clusters(w, tol):
            gq = q[w_group]
            for sub in _clusters(gq, tol):
                members = w_group[sub]
                out_w.append(float(w[members[0]]))
                out_q.append(float(q[members[0]]))
                out_p.append(math.fsum(p[members]))
        return np.array(out_w), np.array(out_q), np.array(out_p)

    def to_csv(self, stream=None, merged: bool = True) -> str:
        w, q, p = self.merged() if merged else (self.w, self.q_h, self.p)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["w", "q_h", "p"])
        for row in zip(w, q, p):
            writer.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Index groups of ``values`` whose sorted neighbours differ by at most ``tol``."""
    order = np.argsort(values, kind="stable")
    if order.size == 0:
        return []
    breaks = np.nonzero(np.diff(values[order]) > tol)[0] + 1
    return np.split(order, breaks)


def _block_atoms(params: CycleParams, two_j: int):
    g = unit_spectrum(params.model, params.ensemble, two_j)
    e0 = params.omega_c * g
    etau = params.omega_h * g
    p_a, _ = boltzmann(e0, params.beta_c)
    p_c, _ = boltzmann(etau, params.beta_h)
    i, k = np.meshgrid(np.arange(g.size), np.arange(g.size), indexing="ij")
    i, k = i.ravel(), k.ravel()
    w = (etau[i] - e0[i]) + (e0[k] - etau[k])
    q = etau[k] - etau[i]
    return w, q, p_a[i] * p_c[k], i, k


def joint_distribution(params: CycleParams) -> WorkHeatDistribution:
    """Exact TPM atoms for collective coupling, every (i, k) pair of every populated block."""
    if params.coupling != COLLECTIVE:
        raise ValueError("joint_distribution needs collective coupling; use product_basis_oracle")
    ws, qs, ps, keys = [], [], [], []
    for two_j, weight in sorted(params.block_weights().items()):
        w, q, p, i, k = _block_atoms(params, two_j)
        ws.append(w)
        qs.append(q)
        ps.append(weight * p)
        keys.append(np.column_stack([np.full_like(i, two_j), i, k]))
    return WorkHeatDistribution(np.concatenate(ws), np.concatenate(qs), np.concatenate(ps),
                                np.concatenate(keys))


def moments(dist: WorkHeatDistribution) -> Moments:
    p, w, q = dist.p, dist.w, dist.q_h
    mean_w = math.fsum(p * w)
    mean_q = math.fsum(p * q)
    return Moments(
        mean_w=mean_w,
        mean_w2=math.fsum(p * w * w),
        var_w=math.fsum(p * (w - mean_w) ** 2),
        mean_qh=mean_q,
        mean_qh2=math.fsum(p * q * q),
        mean_wq=math.fsum(p * w * q),
    )


def independent_ensemble_moments(single: Moments, n: int) -> Moments:
    """Moments of ``n`` statistically independent copies of a one-spin engine."""
    var_w = n * single.var_w
    var_q = n * single.var_qh
    cov = n * single.cov_wq
    mean_w, mean_q = n * single.mean_w, n * single.mean_qh
    return Moments(mean_w, var_w + mean_w**2, var_w, mean_q, var_q + mean_q**2, cov + mean_w * mean_q)


def product_basis_oracle(params: CycleParams) -> WorkHeatDistribution:
    """Enumerate all ``4**n`` product-basis TPM outcomes of independently thermalizing qubits."""
    n = params.ensemble.n
    if not params.ensemble.is_qubit:
        raise ValueError("product-basis oracle is for qubits")
    if n > PRODUCT_ORACLE_MAX_N:
        raise ValueError(f"product-basis oracle limited to n <= {PRODUCT_ORACLE_MAX_N} (got {n})")
    w1, q1, p1, i1, k1 = _block_atoms(replace(params.single_spin(), coupling=COLLECTIVE), 1)
    w, q, p = w1.copy(), q1.copy(), p1.copy()
    i_code, k_code = i1.copy(), k1.copy()
    for _ in range(n - 1):
        w = (w[:, None] + w1[None, :]).ravel()
        q = (q[:, None] + q1[None, :]).ravel()
        p = (p[:, None] * p1[None, :]).ravel()
        i_code = (2 * i_code[:, None] + i1[None, :]).ravel()
        k_code = (2 * k_code[:, None] + k1[None, :]).ravel()
    keys = np.column_stack([np.zeros_like(i_code), i_code, k_code])
    return WorkHeatDistribution(w, q, p, keys)


def cycle_moments(params: CycleParams) -> Moments:
    """Canonical moments: direct summation over TPM atoms (scaled single spin if independent)."""
    if params.coupling == INDEPENDENT:
        single = replace(params.single_spin(), coupling=COLLECTIVE)
        return independent_ensemble_moments(moments(joint_distribution(single)), params.ensemble.n)
    return moments(joint_distribution(params))


# --- characteristic function -------------------------------------------------

_TAYLOR_Z = 1e-8


def _expm1c(z: complex) -> complex:
    """``exp(z) - 1`` without cancellation for small complex z."""
    x, y = z.real, z.imag
    s = math.sin(y / 2)
    return complex(math.expm1(x) * math.cos(y) - 2 * s * s, math.exp(x) * math.sin(y))


def _log_power_bracket_ratio(a: complex, b: complex, levels: int) -> complex:
    """``log[(e^{N a} - e^{N b}) / (e^{a} - e^{b})]`` for integer ``N = levels``.

    Removable singularity at ``a = b (mod 2 pi i)`` is handled with a Taylor series.
    """
    if a.real > b.real:
        a, b = b, a
    z = a - b
    z -= 2j * math.pi * round(z.imag / (2 * math.pi))
    if abs(z) < _TAYLOR_Z:
        nz = levels * z
        num = 1 + nz / 2 + nz * nz / 6 + nz**3 / 24
        den = 1 + z / 2 + z * z / 6 + z**3 / 24
        ratio = levels * num / den
    else:
        ratio = _expm1c(levels * z) / _expm1c(z)
    return (levels - 1) * b + cmath.log(ratio)


def _log_sinh_ratio(theta: float, levels: int) -> float:
    """``log[sinh(theta/2) / sinh(N theta/2)]``, tending to ``-log N`` as theta -> 0."""
    if theta == 0:
        return -math.log(levels)

    def log_sinh(y):
        return y + math.log(-math.expm1(-2 * y)) - math.log(2)

    return log_sinh(theta / 2) - log_sinh(levels * theta / 2)


def characteristic_function(params: CycleParams, gamma1: float, gamma2: float) -> complex:
    """Closed-form ``chi(gamma1, gamma2) = <exp(i gamma1 W + i gamma2 Q_h)>``.

    Valid for ``H = omega J_z`` restricted to the j = ns block under collective
    coupling. The closed form ``A/B`` is evaluated factor by factor in log space:
    each bracket of ``A`` is paired with the matching bracket of ``B``.
    """
    if params.model.kind != LINEAR or params.coupling != COLLECTIVE or params.weights is not None:
        raise ValueError("closed-form chi needs the linear model in the single j = ns block")
    if gamma1 == 0 and gamma2 == 0:
        return 1.0 + 0.0j
    levels = params.ensemble.two_j_max + 1
    spin = (levels - 1) / 2
    wc, wh = params.omega_c, params.omega_h
    tc, th = params.theta_c, params.theta_h
    phase = gamma1 * wc + gamma2 * wh
    log_chi = (
        _log_power_bracket_ratio(complex(th, gamma1 * wh), complex(0.0, phase), levels)
        + _log_power_bracket_ratio(complex(0.0, gamma1 * wh), complex(tc, phase), levels)
        + _log_sinh_ratio(tc, levels)
        + _log_sinh_ratio(th, levels)
        - spin * complex(tc + th, 2 * (gamma1 * (wc + wh) + gamma2 * wh))
    )
    return cmath.exp(log_chi)


def independent_characteristic_function(params: CycleParams, gamma1: float, gamma2: float) -> complex:
    """``chi_1**n``: independent qubits contribute independent factors."""
    single = CycleParams(ModelSpec.linear(), SpinEnsemble(1, 1), params.omega_c, params.omega_h,
                         params.beta_c, params.beta_h)
    return characteristic_function(single, gamma1, gamma2) ** params.ensemble.n


def enumerated_characteristic_function(dist: WorkHeatDistribution, gamma1: float, gamma2: float) -> complex:
    phase = gamma1 * dist.w + gamma2 * dist.q_h
    return complex(math.fsum(dist.p * np.cos(phase)), math.fsum(dist.p * np.sin(phase)))


def moments_from_characteristic(chi: Callable[[float, float], complex], step: float = 1e-2) -> Moments:
    """Moments from central differences of ``chi`` at the origin, one Richardson level.

    Steps much below 1e-2 lose second moments to roundoff: ``chi(h) - 1`` is only
    ``O(h**2 <W**2>)`` above double-precision noise.
    """

    def at(h):
        c0 = chi(0.0, 0.0)
        cp0, cm0 = chi(h, 0.0), chi(-h, 0.0)
        c0p, c0m = chi(0.0, h), chi(0.0, -h)
        cpp, cpm, cmp_, cmm = chi(h, h), chi(h, -h), chi(-h, h), chi(-h, -h)
        d_w = (cp0 - cm0) / (2 * h)
        d_q = (c0p - c0m) / (2 * h)
        d_ww = (cp0 - 2 * c0 + cm0) / (h * h)
        d_qq = (c0p - 2 * c0 + c0m) / (h * h)
        d_wq = (cpp - cpm - cmp_ + cmm) / (4 * h * h)
        return np.array([d_w, d_q, d_ww, d_qq, d_wq])

    coarse, fine = at(step), at(step / 2)
    d_w, d_q, d_ww, d_qq, d_wq = (4 * fine - coarse) / 3
    mean_w = (d_w / 1j).real
    mean_q = (d_q / 1j).real
    mean_w2 = -d_ww.real
    return Moments(mean_w, mean_w2, mean_w2 - mean_w**2, mean_q, -d_qq.real, -d_wq.real)
