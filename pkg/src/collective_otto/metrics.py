"""Engine figures of merit, entropy production and thermodynamic-uncertainty bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .steady_state import collective_steady_state
from .thermo import ThermoPoint, qubit_unit_variance, thermo_point
from .work_stats import INDEPENDENT, CycleParams, Moments

STANDARD_TUR = 2.0
F_SERIES_DELTA = 1e-6


class DegenerateCycleError(ValueError):
    """Raised when a ratio of reliabilities is requested for a cycle with no work fluctuations."""


@dataclass(frozen=True)
class EngineMetrics:
    work_extracted: float
    work_variance: float
    reliability: float
    efficiency: float
    eta_carnot: float
    entropy_production: float
    uncertainty_q: float
    mean_qh: float
    mean_qc: float
    degenerate: bool = False

    @property
    def tur_rhs_collective(self) -> float:
        return 2.0 - self.entropy_production

    @property
    def tur_rhs_standard(self) -> float:
        return STANDARD_TUR

    def as_dict(self) -> dict:
        out = asdict(self)
        out["tur_rhs_collective"] = self.tur_rhs_collective
        out["tur_rhs_standard"] = self.tur_rhs_standard
        return out


def engine_metrics(mom: Moments, params: CycleParams) -> EngineMetrics:
    mean_w, var_w = mom.mean_w, mom.var_w
    q_h, q_c = mom.mean_qh, mom.mean_qc
    sigma = -params.beta_h * q_h - params.beta_c * q_c
    degenerate = var_w <= 0 or mean_w == 0
    if degenerate:
        r = q = math.nan
    else:
        r = abs(mean_w) / math.sqrt(var_w)
        q = sigma * var_w / mean_w**2
    eff = -mean_w / q_h if q_h != 0 else math.nan
    return EngineMetrics(
        work_extracted=-mean_w,
        work_variance=var_w,
        reliability=r,
        efficiency=eff,
        eta_carnot=params.eta_carnot,
        entropy_production=sigma,
        uncertainty_q=q,
        mean_qh=q_h,
        mean_qc=q_c,
        degenerate=degenerate,
    )


def reliability_ratio(collective: EngineMetrics, independent: EngineMetrics) -> float:
    """``lambda_r = r_col**2 / r_ind**2``."""
    if collective.degenerate or independent.degenerate:
        raise DegenerateCycleError("reliability is undefined for a degenerate cycle")
    return collective.reliability**2 / independent.reliability**2


@dataclass(frozen=True)
class TurBound:
    theta_c: float
    theta_h: float
    delta: float
    f_value: float
    f_large_theta: float


def _delta_coth_half(delta: float) -> float:
    if delta < 1e-4:
        return 2.0 + delta * delta / 6
    return delta / math.tanh(delta / 2)


def tur_bound_f(theta_c: float, theta_h: float) -> TurBound:
    """Bound function ``f`` of the large-n collective TUR and its large-theta_h limit.

    Written with ``3 - cosh D - cosh(D+t) - cosh t = -2[sh^2(D/2) + sh^2(t/2) + sh^2((D+t)/2)]``
    and ``sinh D - sinh(D+t) + sinh t = -4 sh(D/2) sh(t/2) sh((D+t)/2)`` to avoid cancellation.
    """
    if not theta_c > theta_h > 0:
        raise ValueError(f"need theta_c > theta_h > 0, got theta_c={theta_c}, theta_h={theta_h}")
    delta = theta_c - theta_h
    if delta < F_SERIES_DELTA:
        # f = 2 + delta^2 (1/6 + 1/(cosh theta_h - 1)) + O(delta^3)
        f = 2.0 + delta * delta * (1 / 6 + 1 / (2 * math.sinh(theta_h / 2) ** 2))
    else:
        a, b, c = (math.sinh(v / 2) for v in (delta, theta_h, theta_c))
        f = delta * (a * a + b * b + c * c) / (2 * a * b * c)
    return TurBound(theta_c, theta_h, delta, f, _delta_coth_half(delta))


@dataclass(frozen=True)
class TurReport:
    collective_bound: bool
    standard_bound: bool
    violation: bool


def tur_check(metrics: EngineMetrics, slack: float = 1e-10) -> TurReport:
    q = metrics.uncertainty_q
    collective = q >= metrics.tur_rhs_collective - slack
    standard = q >= STANDARD_TUR
    return TurReport(collective, standard, collective and not standard)


@dataclass(frozen=True)
class NearCarnotPrediction:
    mean_w: float
    var_w_two_bath: float
    var_w_limit: float
    lambda_r: float
    unit_var_h: float
    unit_var_c: float
    unit_var_ind_h: float


def _unit_variance(params: CycleParams, beta: float, omega: float) -> float:
    """``C(theta) / theta**2`` of the working medium's steady state."""
    if params.coupling == INDEPENDENT:
        return params.ensemble.n * qubit_unit_variance(beta * omega)
    weights = {tj / 2: w for tj, w in params.block_weights().items()}
    state = collective_steady_state(params.model, params.ensemble, beta, omega, weights)
    return thermo_point(state).unit_variance


def near_carnot_predictions(params: CycleParams, thermo_h: ThermoPoint | None = None) -> NearCarnotPrediction:
    """Heat-capacity predictions for the cycle, accurate to first order in ``delta_eta``.

    ``thermo_h`` may carry a precomputed hot-bath steady state of the working medium.
    """
    wc, wh = params.omega_c, params.omega_h
    v_h = thermo_h.unit_variance if thermo_h is not None else _unit_variance(params, params.beta_h, wh)
    v_c = _unit_variance(params, params.beta_c, wc)
    v_ind = params.ensemble.n * qubit_unit_variance(params.theta_h)
    return NearCarnotPrediction(
        mean_w=-params.delta_eta * wh * wh * (params.beta_c - params.beta_h) * v_h,
        var_w_two_bath=(wc - wh) ** 2 * (v_h + v_c),
        var_w_limit=2 * wh * wh * params.eta_carnot**2 * v_h,
        lambda_r=v_h / v_ind,
        unit_var_h=v_h,
        unit_var_c=v_c,
        unit_var_ind_h=v_ind,
    )
