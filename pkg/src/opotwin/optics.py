"""Closed-form optics of a below-threshold degenerate OPO.

Pure, deterministic relations between pump power, parametric gain, threshold,
and the quadrature noise spectra of the emitted squeezed vacuum:

    G            = (1/4) * (sqrt(P_max/P_min) + 1)^2          seed min/max -> gain
    G(P)         = (1 - mu)^-2,   mu = sqrt(P / P_th)          gain vs pump
    P_th         = T_P/(1-T_P) * T^2 / (4 b E_NL),  b = (2 - T_P/2)^2
    S_-(omega)   = 1 - 4 eta mu / ((1+mu)^2 + (omega/dw)^2)    squeezed quadrature
    S_+(omega)   = 1 + 4 eta mu / ((1-mu)^2 + (omega/dw)^2)    antisqueezed quadrature

Variances are relative to shot noise (vacuum = 1).  `dw` is the cavity
half-width at half maximum; the 250 MHz FWHM fundamental line therefore
enters as dw = 125 MHz.  All functions are stateless and safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import AboveThresholdError, DomainError

# Fundamental cavity line, FWHM in MHz.  The spectra use the half-width.
CAVITY_FWHM_MHZ = 250.0
CAVITY_HWHM_MHZ = CAVITY_FWHM_MHZ / 2.0

SQUEEZED = "squeezed"
ANTISQUEEZED = "antisqueezed"


@dataclass(frozen=True)
class CavityParams:
    """Static optical constants of the monolithic cavity.

    T_out            fundamental output-coupler power transmission
    T_pump           pump input-coupler power transmission
    bandwidth_fwhm   fundamental cavity FWHM in MHz
    d_per_cm         single-pass conversion efficiency, fraction W^-1 cm^-1
    crystal_length_cm  effective interaction length in cm
    """

    T_out: float = 0.14
    T_pump: float = 0.31
    bandwidth_fwhm: float = CAVITY_FWHM_MHZ
    d_per_cm: float = 0.00106
    crystal_length_cm: float = 0.70

    def __post_init__(self):
        if not (0.0 < self.T_out < 1.0 and 0.0 < self.T_pump < 1.0):
            raise DomainError("coupler transmissions must lie in (0, 1)")
        if self.bandwidth_fwhm <= 0.0:
            raise DomainError("cavity bandwidth must be positive")
        if self.d_per_cm < 0.0:
            raise DomainError("single-pass efficiency must be >= 0")
        if self.crystal_length_cm <= 0.0:
            raise DomainError("crystal length must be positive")

    @property
    def e_nl(self) -> float:
        """Total nonlinear efficiency E_NL = d_per_cm * length, in W^-1."""
        return self.d_per_cm * self.crystal_length_cm

    @property
    def hwhm_mhz(self) -> float:
        return self.bandwidth_fwhm / 2.0


@dataclass(frozen=True)
class EfficiencyBudget:
    """Loss factors between the intracavity squeezed field and the detector.

    The homodyne visibility enters squared; everything else linearly.
    """

    eta_det: float = 0.90
    eta_hom: float = 0.98
    eta_loss: float = 0.95
    eta_cav: float = 0.95

    def __post_init__(self):
        for name in ("eta_det", "eta_hom", "eta_loss", "eta_cav"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    def total(self) -> float:
        return self.eta_det * self.eta_hom**2 * self.eta_loss * self.eta_cav


@dataclass(frozen=True)
class ThermalState:
    """Crystal temperatures: active section T_A plus the two side sections.

    The control coordinates are derived, never stored:
    T_S = (T_1 + T_2) / 2 sets the pump resonance, T_D = T_1 - T_2 the
    forward/backward interference.
    """

    T_A: float
    T_1: float
    T_2: float

    @property
    def T_S(self) -> float:
        return 0.5 * (self.T_1 + self.T_2)

    @property
    def T_D(self) -> float:
        return self.T_1 - self.T_2

    def with_sum_diff(self, T_S: float | None = None, T_D: float | None = None) -> "ThermalState":
        """Return a copy with the side sections set via (T_S, T_D)."""
        s = self.T_S if T_S is None else T_S
        d = self.T_D if T_D is None else T_D
        return replace(self, T_1=s + 0.5 * d, T_2=s - 0.5 * d)


@dataclass(frozen=True)
class TuningResponse:
    """Phenomenological thermal-tuning landscape.

    Three independent factors multiply the effective pump power: a sinc^2
    phase-matching acceptance in T_A, a Lorentzian pump resonance in T_S and
    a cos^2 interference fringe in T_D.  Widths are configuration, not
    measured quantities.
    """

    T_A_opt: float = 34.20
    T_S_opt: float = 35.10
    T_D_opt: float = 0.30
    w_A: float = 0.5
    w_S: float = 0.2
    lambda_D: float = 1.0

    def __post_init__(self):
        if min(self.w_A, self.w_S, self.lambda_D) <= 0.0:
            raise DomainError("tuning widths and period must be positive")


@dataclass(frozen=True)
class KerrState:
    """Slow dispersive detuning that follows the intracavity power history.

    `shift` relaxes toward coupling * P with time constant tau_s.  It moves
    the fundamental resonance only; it adds no excess quadrature noise.
    """

    shift: float = 0.0
    tau_s: float = 12.0
    coupling: float = 0.0

    def __post_init__(self):
        if self.tau_s <= 0.0:
            raise DomainError("relaxation time constant must be positive")
        if not math.isfinite(self.shift):
            raise DomainError("dispersive shift must be finite")


def gain_from_minmax(p_max: float, p_min: float) -> float:
    """Parametric gain from the amplified/deamplified seed extremes.

    G = (1/4) (sqrt(P_max/P_min) + 1)^2, with P_max the amplified and P_min
    the deamplified seed power over one pump-phase period.
    """
    if p_min <= 0.0 or p_max <= 0.0:
        raise DomainError("seed powers must be positive")
    if p_max < p_min:
        raise DomainError("amplified power below deamplified power")
    return 0.25 * (math.sqrt(p_max / p_min) + 1.0) ** 2


def parametric_gain(pump_power: float, p_th: float) -> float:
    """Below-threshold gain G = (1 - mu)^-2 with mu = sqrt(P/P_th)."""
    mu = pump_amplitude(pump_power, p_th)
    return (1.0 - mu) ** -2


def pump_amplitude(pump_power: float, p_th: float) -> float:
    """mu = sqrt(P/P_th); rejects pump at or above threshold."""
    if p_th <= 0.0:
        raise DomainError("threshold power must be positive")
    if pump_power < 0.0:
        raise DomainError("pump power must be >= 0")
    if pump_power >= p_th:
        raise AboveThresholdError(
            f"pump {pump_power:.4g} W at/above threshold {p_th:.4g} W: "
            "only the below-threshold regime is modeled"
        )
    return math.sqrt(pump_power / p_th)


def threshold_power(params: CavityParams) -> float:
    """OPO threshold P_th = T_P/(1-T_P) * T^2 / (4 b E_NL) in watts.

    b = (2 - T_P/2)^2 is the double-pass enhancement; assumes a critically
    coupled pump cavity and negligible fundamental intracavity loss.
    """
    e_nl = params.e_nl
    if e_nl == 0.0:
        raise DomainError("zero nonlinear efficiency: threshold is infinite")
    b = (2.0 - params.T_pump / 2.0) ** 2
    return (params.T_pump / (1.0 - params.T_pump)) * params.T_out**2 / (4.0 * b * e_nl)


def quadrature_noise(
    omega_mhz: float,
    mu: float,
    eta: float,
    quadrature: str = SQUEEZED,
    hwhm_mhz: float = CAVITY_HWHM_MHZ,
) -> float:
    """Quadrature variance relative to shot noise at detection frequency omega.

    squeezed:      1 - 4 eta mu / ((1+mu)^2 + (omega/dw)^2)
    antisqueezed:  1 + 4 eta mu / ((1-mu)^2 + (omega/dw)^2)

    `dw` (hwhm_mhz) is the cavity half-width; both frequencies in MHz.
    At eta = 1 the two quadratures multiply to exactly 1 at every frequency.
    """
    if not 0.0 <= mu:
        raise DomainError("mu must be >= 0")
    if mu >= 1.0:
        raise AboveThresholdError("mu >= 1: pump at/above threshold")
    if not 0.0 <= eta <= 1.0:
        raise DomainError("efficiency must lie in [0, 1]")
    if omega_mhz < 0.0:
        raise DomainError("detection frequency must be >= 0")
    x = (omega_mhz / hwhm_mhz) ** 2
    if quadrature == SQUEEZED:
        return 1.0 - 4.0 * eta * mu / ((1.0 + mu) ** 2 + x)
    if quadrature == ANTISQUEEZED:
        return 1.0 + 4.0 * eta * mu / ((1.0 - mu) ** 2 + x)
    raise DomainError(f"unknown quadrature {quadrature!r}")


def apply_passive_loss(variance: float, transmission: float) -> float:
    """Mix a quadrature variance with vacuum through a passive attenuator.

    V -> t V + (1 - t).  Vacuum (V = 1) is invariant; full absorption
    returns vacuum.  Composing transmissions t1 then t2 equals t1*t2.
    """
    if variance <= 0.0:
        raise DomainError("variance must be positive")
    if not 0.0 <= transmission <= 1.0:
        raise DomainError("transmission must lie in [0, 1]")
    return transmission * variance + (1.0 - transmission)


def tuning_factor(thermal: ThermalState, resp: TuningResponse) -> float:
    """Pump-power multiplier from the three thermal degrees of freedom, in [0, 1].

    sinc^2 phase-matching acceptance (T_A), Lorentzian pump resonance (T_S),
    cos^2 forward/backward interference fringe (T_D).  Equals 1 at the joint
    optimum; the effective pump driving the parametric interaction is
    pump_power * tuning_factor.
    """
    u_a = (thermal.T_A - resp.T_A_opt) / resp.w_A
    # unnormalized sinc: sin(pi u)/(pi u)
    sinc = 1.0 if u_a == 0.0 else math.sin(math.pi * u_a) / (math.pi * u_a)
    f_a = sinc**2
    u_s = (thermal.T_S - resp.T_S_opt) / resp.w_S
    f_s = 1.0 / (1.0 + u_s**2)
    u_d = (thermal.T_D - resp.T_D_opt) / resp.lambda_D
    f_d = math.cos(math.pi * u_d) ** 2
    return f_a * f_s * f_d


def kerr_step(state: KerrState, intracavity_power: float, dt: float) -> KerrState:
    """Advance the slow dispersive shift by dt seconds.

    First-order relaxation toward coupling * P using the exact exponential
    update, so arbitrary step sizes stay stable:
    shift += (coupling * P - shift) * (1 - exp(-dt/tau)).
    """
    if dt <= 0.0:
        raise DomainError("time step must be positive")
    target = state.coupling * intracavity_power
    new_shift = state.shift + (target - state.shift) * (1.0 - math.exp(-dt / state.tau_s))
    return replace(state, shift=new_shift)


def seed_transmission_extrema(seed_power: float, mu: float, lineshape: float = 1.0) -> tuple[float, float]:
    """Exact (P_max, P_min) of the phase-swept seed leaving the cavity.

    The in-phase quadrature is amplified by (1-mu)^-2 in power, the
    out-of-phase one deamplified by (1+mu)^-2; `lineshape` is the Lorentzian
    transmission factor at the current fundamental detuning.  Feeding these
    into gain_from_minmax recovers (1-mu)^-2 identically.
    """
    if mu >= 1.0:
        raise AboveThresholdError("mu >= 1: pump at/above threshold")
    base = seed_power * lineshape
    return base / (1.0 - mu) ** 2, base / (1.0 + mu) ** 2


def lorentzian_lineshape(detuning_mhz: float, fwhm_mhz: float = CAVITY_FWHM_MHZ) -> float:
    """Cavity transmission vs detuning, normalized to 1 on resonance."""
    half = fwhm_mhz / 2.0
    return 1.0 / (1.0 + (detuning_mhz / half) ** 2)
