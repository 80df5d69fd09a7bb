"""Time-stepped virtual apparatus.

One `Apparatus` instance owns the full mutable state of the simulated
experiment: laser detuning, cavity drift, crystal temperatures, the slow
dispersive shift, the MEMS seed/LO switch, the synchronized pump-phase
sweep, and a seeded RNG.  A fixed tick (default 1 ms) advances everything;
identical (seed, config, command stream) gives bit-identical outputs.

Detection is synthesized at baseband: instead of simulating a 10 MHz
carrier sample-by-sample, each LO tick draws one resolution-bandwidth power
estimate whose mean is V * shot + electronic, with V the quadrature
variance at the analyzer's center frequency.  A tick integrates
2 * RBW * tick degrees of freedom, so the estimate is chi-squared
distributed with the right spread.  The video-bandwidth filter then smooths
the displayed trace; the unsmoothed band powers are kept alongside because
the video filter's lag biases phase-swept extrema.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import db_from_linear, linear_from_db
from .errors import DomainError, SimulationFault
from .optics import (
    CavityParams,
    EfficiencyBudget,
    KerrState,
    ThermalState,
    TuningResponse,
    apply_passive_loss,
    gain_from_minmax,
    kerr_step,
    lorentzian_lineshape,
    pump_amplitude,
    quadrature_noise,
    threshold_power,
    tuning_factor,
)

MEMS_SEED = "seed"
MEMS_LO = "lo"

POWER_FLOOR_MW = 1e-30  # avoids -inf dBm when every noise source is off


@dataclass(frozen=True)
class ScheduleConfig:
    """MEMS switching and pump-phase sweep timing.

    The sweep waveform restarts at 0 at every seed-window start and
    traverses the full span within the seed window, so every window sees an
    identical phase profile (the sweep trigger is slaved to the switch).
    """

    mems_rate: float = 10.0  # Hz
    duty: float = 0.5  # fraction of the period spent on the seed
    sweep_span: float = 10.0 * math.pi  # rad per seed window
    tick: float = 1e-3  # s
    waveform: str = "triangle"  # triangle | sawtooth

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise DomainError("duty must lie in (0, 1)")
        if self.mems_rate <= 0.0 or self.tick <= 0.0 or self.sweep_span <= 0.0:
            raise DomainError("mems_rate, tick and sweep_span must be positive")
        if self.tick >= 1.0 / (2.0 * self.mems_rate):
            raise DomainError("tick must resolve the MEMS half-period")
        if self.waveform not in ("triangle", "sawtooth"):
            raise DomainError(f"unknown sweep waveform {self.waveform!r}")

    @property
    def period(self) -> float:
        return 1.0 / self.mems_rate

    @property
    def ticks_per_period(self) -> int:
        return max(1, round(self.period / self.tick))

    @property
    def seed_ticks(self) -> int:
        return max(1, round(self.duty * self.ticks_per_period))


def mems_position(t: float, schedule: ScheduleConfig) -> str:
    """Switch position at time t: seed during the first duty fraction."""
    tau = t - math.floor(t / schedule.period + 1e-9) * schedule.period
    return MEMS_SEED if tau < schedule.duty * schedule.period - 1e-12 else MEMS_LO


def sweep_phase(t: float, schedule: ScheduleConfig) -> float:
    """Pump phase of the synchronized sweep at time t (rad).

    Triangle: rises 0 -> span across the seed window, falls back to 0
    across the LO window.  Sawtooth: rises 0 -> span in each half.  Either
    way the phase is 0 at every seed-window start and advances exactly
    `sweep_span` per seed window.
    """
    if t < 0.0:
        raise DomainError("time must be >= 0")
    period = schedule.period
    tau = t - math.floor(t / period + 1e-9) * period
    t_seed = schedule.duty * period
    if tau < t_seed - 1e-12:
        return schedule.sweep_span * (tau / t_seed)
    frac = (tau - t_seed) / (period - t_seed)
    if schedule.waveform == "triangle":
        return schedule.sweep_span * (1.0 - frac)
    return schedule.sweep_span * frac


@dataclass(frozen=True)
class SAConfig:
    """Spectrum analyzer in zero-span mode at a fixed center frequency."""

    center_freq: float = 10.0  # MHz
    rbw: float = 3.0  # MHz
    vbw: float = 100.0  # Hz
    mode: str = "zero-span"

    def __post_init__(self):
        if self.center_freq <= 0.0:
            raise DomainError("center frequency must be positive")
        if self.rbw <= 0.0 or self.vbw <= 0.0:
            raise DomainError("RBW and VBW must be positive")
        if self.vbw > self.rbw * 1e6:
            raise DomainError("VBW cannot exceed RBW")
        if self.mode != "zero-span":
            raise DomainError("only zero-span mode is emulated")


@dataclass(frozen=True)
class DetectorModel:
    """Balanced detector + analyzer noise levels at a reference RBW.

    electronic_noise_dbm   LO-independent floor per reference RBW
    shot_noise_1mw_dbm     shot-noise-only power at 1 mW LO, reference RBW;
                           calibrated so the shot-to-electronic clearance at
                           the 2.5 mW operating point is ~3.0 (the ratio that
                           makes the electronic-noise correction arithmetic
                           self-consistent)
    bandwidth_mhz          flat response assumed within this bandwidth
    """

    electronic_noise_dbm: float = -70.75
    shot_noise_1mw_dbm: float = -71.704776
    reference_rbw_mhz: float = 3.0
    bandwidth_mhz: float = 45.0

    def __post_init__(self):
        if self.reference_rbw_mhz <= 0.0 or self.bandwidth_mhz <= 0.0:
            raise DomainError("bandwidths must be positive")

    def electronic_mw(self, rbw_mhz: float) -> float:
        return linear_from_db(self.electronic_noise_dbm) * rbw_mhz / self.reference_rbw_mhz

    def shot_mw(self, lo_power_mw: float, rbw_mhz: float) -> float:
        if lo_power_mw < 0.0:
            raise DomainError("LO power must be >= 0")
        return (
            linear_from_db(self.shot_noise_1mw_dbm)
            * lo_power_mw
            * rbw_mhz
            / self.reference_rbw_mhz
        )


@dataclass(frozen=True)
class DriftConfig:
    """Cavity-resonance drift: random walk plus an optional thermal ramp."""

    sigma_mhz_sqrt_s: float = 0.5
    ramp_mhz_s: float = 1.0

    def __post_init__(self):
        if self.sigma_mhz_sqrt_s < 0.0:
            raise DomainError("random-walk amplitude must be >= 0")


@dataclass
class TickOutputs:
    """Signals produced by one tick."""

    time_s: float
    mems: str
    pump_phase: float
    detuning_mhz: float  # effective laser-cavity detuning
    d_r_mw: float  # seed transmission on D_R (0 during LO windows)
    band_power_mw: float  # homodyne-difference power in the RBW
    variance_rel: float  # synthesized quadrature variance (1 = shot)
    seed_window_done: bool = False
    window_max_mw: float = float("nan")
    window_min_mw: float = float("nan")


def homodyne_sample(variance: float, shot_level: float, electronic: float, rng) -> float:
    """One instantaneous homodyne power sample.

    Draws a zero-mean Gaussian quadrature value of variance
    variance * shot_level, adds an independent Gaussian electronic
    contribution, and returns the squared total.  The ensemble mean
    converges to variance * shot_level + electronic at rate 1/sqrt(N).
    """
    if variance < 0.0:
        raise DomainError("variance must be >= 0")
    x = 0.0
    if variance * shot_level > 0.0:
        x += rng.standard_normal() * math.sqrt(variance * shot_level)
    if electronic > 0.0:
        x += rng.standard_normal() * math.sqrt(electronic)
    return x * x


class Apparatus:
    """The virtual experiment: one logical owner advances it tick by tick.

    Read-only snapshots may be taken between ticks; there is no internal
    parallelism.  All randomness flows from the single seeded generator, so
    a run is reproducible from (config, seed, command stream).
    """

    def __init__(
        self,
        cavity: CavityParams | None = None,
        budget: EfficiencyBudget | None = None,
        thermal: ThermalState | None = None,
        tuning: TuningResponse | None = None,
        kerr: KerrState | None = None,
        schedule: ScheduleConfig | None = None,
        sa: SAConfig | None = None,
        detector: DetectorModel | None = None,
        drift: DriftConfig | None = None,
        seed_power_mw: float = 1.0,
        lo_power_mw: float = 2.5,
        rng_seed: int = 12345,
    ):
        self.cavity = cavity or CavityParams()
        self.budget = budget or EfficiencyBudget()
        self.tuning = tuning or TuningResponse()
        self.thermal = thermal or ThermalState(
            T_A=self.tuning.T_A_opt, T_1=self.tuning.T_S_opt + 0.5 * self.tuning.T_D_opt,
            T_2=self.tuning.T_S_opt - 0.5 * self.tuning.T_D_opt,
        )
        self.kerr = kerr or KerrState()
        self.schedule = schedule or ScheduleConfig()
        self.sa = sa or SAConfig()
        self.detector = detector or DetectorModel()
        self.drift = drift or DriftConfig()
        if seed_power_mw < 0.0 or lo_power_mw < 0.0:
            raise DomainError("optical powers must be >= 0")
        self.seed_power_mw = seed_power_mw
        self.lo_power_mw = lo_power_mw
        self.rng = np.random.default_rng(rng_seed)

        self.p_th = threshold_power(self.cavity)
        self.tick_index = 0
        self.clock = 0.0
        self.laser_detuning = 0.0  # MHz, the locked/walked variable
        self.resonance_offset = 0.0  # MHz, drift of the cavity resonance
        self.pump_power = 0.0  # W
        self.pump_phase = 0.0  # rad
        self.sweep_on = True
        self.mems = MEMS_SEED
        self.filter_transmission: float | None = None
        self.last_window_gain = float("nan")

        # per-seed-window extrema accumulators
        self._win_max = -math.inf
        self._win_min = math.inf
        self._win_index = -1

    # -- derived quantities ------------------------------------------------

    def effective_mu(self) -> float:
        eff_pump = self.pump_power * tuning_factor(self.thermal, self.tuning)
        mu = pump_amplitude(eff_pump, self.p_th)  # raises at/above threshold
        return mu

    def effective_detuning(self) -> float:
        return self.laser_detuning - self.resonance_offset - self.kerr.shift

    def quadrature_variance(self, pump_phase: float) -> float:
        """Detected quadrature variance at the SA center frequency.

        The LO-selected quadrature rotates at half the pump phase, so the
        trace arches between S- and S+ with period 2*pi in pump phase.  A
        passive filter in the squeezed path mixes the variance with vacuum.
        """
        mu = self.effective_mu()
        eta = self.budget.total()
        s_minus = quadrature_noise(self.sa.center_freq, mu, eta, "squeezed",
                                   hwhm_mhz=self.cavity.hwhm_mhz)
        s_plus = quadrature_noise(self.sa.center_freq, mu, eta, "antisqueezed",
                                  hwhm_mhz=self.cavity.hwhm_mhz)
        theta = 0.5 * pump_phase
        v = s_minus * math.cos(theta) ** 2 + s_plus * math.sin(theta) ** 2
        if self.filter_transmission is not None:
            v = apply_passive_loss(v, self.filter_transmission)
        return v

    # -- stepping ------------------------------------------------------------

    def step(self) -> TickOutputs:
        """Advance one tick and emit the detector signals."""
        dt = self.schedule.tick
        self.tick_index += 1
        self.clock = self.tick_index * dt
        t = self.clock

        tpp = self.schedule.ticks_per_period
        tick_in_period = self.tick_index % tpp
        self.mems = MEMS_SEED if tick_in_period < self.schedule.seed_ticks else MEMS_LO
        if self.sweep_on:
            self.pump_phase = sweep_phase(t, self.schedule)

        z = self.rng.standard_normal()
        self.resonance_offset += (
            self.drift.ramp_mhz_s * dt + self.drift.sigma_mhz_sqrt_s * math.sqrt(dt) * z
        )

        detuning = self.effective_detuning()
        if not math.isfinite(detuning):
            raise SimulationFault("non-finite detuning in apparatus state")
        line = lorentzian_lineshape(detuning, self.cavity.bandwidth_fwhm)
        mu = self.effective_mu()

        if self.mems == MEMS_SEED:
            theta = 0.5 * self.pump_phase
            base = self.seed_power_mw * line
            d_r = base * (
                math.cos(theta) ** 2 / (1.0 - mu) ** 2
                + math.sin(theta) ** 2 / (1.0 + mu) ** 2
            )
            variance = 1.0
            mean_mw = self.detector.electronic_mw(self.sa.rbw)
        else:
            d_r = 0.0
            variance = self.quadrature_variance(self.pump_phase)
            shot = self.detector.shot_mw(self.lo_power_mw, self.sa.rbw)
            mean_mw = variance * shot + self.detector.electronic_mw(self.sa.rbw)

        band = self._band_power_draw(mean_mw)

        # intracavity fundamental drives the slow dispersive shift
        circulating_w = (d_r * 1e-3) / self.cavity.T_out
        self.kerr = kerr_step(self.kerr, circulating_w, dt)

        out = TickOutputs(
            time_s=t,
            mems=self.mems,
            pump_phase=self.pump_phase,
            detuning_mhz=detuning,
            d_r_mw=d_r,
            band_power_mw=band,
            variance_rel=variance,
        )
        self._track_seed_window(out, tick_in_period)
        return out

    def _band_power_draw(self, mean_mw: float) -> float:
        """Chi-squared band-power estimate with 2*RBW*tick degrees of freedom."""
        k = max(2, round(2.0 * self.sa.rbw * 1e6 * self.schedule.tick))
        g = self.rng.gamma(shape=k / 2.0) / (k / 2.0)
        return max(mean_mw * g, 0.0)

    def _track_seed_window(self, out: TickOutputs, tick_in_period: int) -> None:
        if self.mems == MEMS_SEED:
            if self._win_index < 0:
                self._win_index = self.tick_index // self.schedule.ticks_per_period
            self._win_max = max(self._win_max, out.d_r_mw)
            self._win_min = min(self._win_min, out.d_r_mw)
        elif tick_in_period == self.schedule.seed_ticks and self._win_index >= 0:
            out.seed_window_done = True
            out.window_max_mw = self._win_max
            out.window_min_mw = self._win_min
            if self._win_min > 0.0 and self._win_max >= self._win_min:
                self.last_window_gain = gain_from_minmax(self._win_max, self._win_min)
            self._win_max = -math.inf
            self._win_min = math.inf
            self._win_index = -1

    def run_ticks(self, n: int) -> list[TickOutputs]:
        return [self.step() for _ in range(n)]

    def snapshot(self) -> dict:
        """Read-only view of the state, safe to serialize."""
        return {
            "time_s": self.clock,
            "laser_detuning_mhz": self.laser_detuning,
            "resonance_offset_mhz": self.resonance_offset,
            "effective_detuning_mhz": self.effective_detuning(),
            "kerr_shift_mhz": self.kerr.shift,
            "pump_power_w": self.pump_power,
            "pump_phase_rad": self.pump_phase,
            "sweep_on": self.sweep_on,
            "mems": self.mems,
            "seed_power_mw": self.seed_power_mw,
            "lo_power_mw": self.lo_power_mw,
            "T_A": self.thermal.T_A,
            "T_1": self.thermal.T_1,
            "T_2": self.thermal.T_2,
            "T_S": self.thermal.T_S,
            "T_D": self.thermal.T_D,
            "tuning_factor": tuning_factor(self.thermal, self.tuning),
            "filter_transmission": self.filter_transmission,
            "gain_estimate": self.last_window_gain,
        }

    # -- operator-facing mutations (applied between ticks) -------------------

    def set_temperatures(self, T_A=None, T_1=None, T_2=None):
        self.thermal = replace(
            self.thermal,
            T_A=self.thermal.T_A if T_A is None else float(T_A),
            T_1=self.thermal.T_1 if T_1 is None else float(T_1),
            T_2=self.thermal.T_2 if T_2 is None else float(T_2),
        )

    def set_pump_power(self, watts: float):
        if watts < 0.0:
            raise DomainError("pump power must be >= 0")
        self.pump_power = float(watts)
        self.effective_mu()  # validates below threshold

    def set_lo_power(self, mw: float):
        if mw < 0.0:
            raise DomainError("LO power must be >= 0")
        self.lo_power_mw = float(mw)

    def set_seed_power(self, mw: float):
        if mw < 0.0:
            raise DomainError("seed power must be >= 0")
        self.seed_power_mw = float(mw)

    def set_filter(self, transmission: float | None):
        if transmission is not None and not 0.0 <= transmission <= 1.0:
            raise DomainError("filter transmission must lie in [0, 1]")
        self.filter_transmission = transmission

    def set_sa(self, center_freq=None, rbw=None, vbw=None):
        self.sa = SAConfig(
            center_freq=self.sa.center_freq if center_freq is None else float(center_freq),
            rbw=self.sa.rbw if rbw is None else float(rbw),
            vbw=self.sa.vbw if vbw is None else float(vbw),
        )


@dataclass
class NoiseTrace:
    """Zero-span power-vs-time trace with its instrument settings.

    `power_dbm` is the displayed, video-filtered trace; `raw_dbm` keeps the
    unsmoothed per-tick band powers (the video filter's lag systematically
    under-reads phase-swept extrema, so reductions use the raw values).
    """

    time_s: np.ndarray
    phase_rad: np.ndarray
    power_dbm: np.ndarray
    mems_pos: np.ndarray  # array of "seed"/"lo" strings
    raw_dbm: np.ndarray
    config: SAConfig
    tick_s: float

    def __len__(self):
        return len(self.time_s)

    def raw_mw(self) -> np.ndarray:
        return 10.0 ** (self.raw_dbm / 10.0)

    def lo_mask(self) -> np.ndarray:
        return self.mems_pos == MEMS_LO

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "phase_rad", "power_dbm", "mems_pos"])
            for t, ph, p, m in zip(self.time_s, self.phase_rad, self.power_dbm, self.mems_pos):
                w.writerow([f"{t:.6f}", f"{ph:.9g}", f"{p:.9g}", m])


def sa_zero_span(
    band_power_mw: np.ndarray,
    cfg: SAConfig,
    tick_s: float,
    time_s: np.ndarray | None = None,
    phase_rad: np.ndarray | None = None,
    mems_pos: np.ndarray | None = None,
) -> NoiseTrace:
    """Emulate the zero-span display: VBW low-pass on band power, in dBm.

    The input samples are already band-limited RBW power estimates (the
    baseband synthesis), so no carrier-rate processing is needed.  The video
    filter is a single pole at `vbw`; the first sample initializes it.
    """
    x = np.asarray(band_power_mw, dtype=float)
    n = x.size
    if time_s is None:
        time_s = (np.arange(n) + 1) * tick_s
    if phase_rad is None:
        phase_rad = np.zeros(n)
    if mems_pos is None:
        mems_pos = np.array([MEMS_LO] * n)
    if n == 0:
        empty = np.array([])
        return NoiseTrace(empty, empty, empty, np.array([], dtype=object), empty, cfg, tick_s)

    alpha = 1.0 - math.exp(-2.0 * math.pi * cfg.vbw * tick_s)
    y = np.empty(n)
    acc = x[0]
    for i, v in enumerate(x):
        acc += alpha * (v - acc)
        y[i] = acc
    power_dbm = 10.0 * np.log10(np.maximum(y, POWER_FLOOR_MW))
    raw_dbm = 10.0 * np.log10(np.maximum(x, POWER_FLOOR_MW))
    return NoiseTrace(
        np.asarray(time_s, dtype=float),
        np.asarray(phase_rad, dtype=float),
        power_dbm,
        np.asarray(mems_pos),
        raw_dbm,
        cfg,
        tick_s,
    )


def collect_trace(apparatus: Apparatus, n_ticks: int) -> NoiseTrace:
    """Step the apparatus and assemble the SA trace for those ticks."""
    outs = apparatus.run_ticks(n_ticks)
    return sa_zero_span(
        np.array([o.band_power_mw for o in outs]),
        apparatus.sa,
        apparatus.schedule.tick,
        time_s=np.array([o.time_s for o in outs]),
        phase_rad=np.array([o.pump_phase for o in outs]),
        mems_pos=np.array([o.mems for o in outs]),
    )


def lo_power_scan(
    powers_mw,
    detector: DetectorModel,
    sa: SAConfig | None = None,
    rng=None,
    ticks_per_point: int = 1500,
    tick_s: float = 1e-3,
) -> list[tuple[float, float]]:
    """Pump-off total noise vs LO power: (mW, dBm) per point.

    Each point averages `ticks_per_point` chi-squared band-power estimates
    around the model mean shot(P) + electronic, reproducing the linear
    power dependence with a constant electronic offset.
    """
    sa = sa or SAConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    k = max(2, round(2.0 * sa.rbw * 1e6 * tick_s))
    out = []
    for p in powers_mw:
        if p < 0.0:
            raise DomainError("LO power must be >= 0")
        mean = detector.shot_mw(p, sa.rbw) + detector.electronic_mw(sa.rbw)
        draws = rng.gamma(shape=k / 2.0, size=ticks_per_point) / (k / 2.0)
        est = float(np.mean(mean * draws))
        out.append((float(p), db_from_linear(max(est, POWER_FLOOR_MW))))
    return out
