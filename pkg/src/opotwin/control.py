"""Lock and tuning procedures as explicit state machines.

The fundamental lock "walks" the laser frequency in fixed steps at a fixed
cadence, reversing direction whenever the per-window maximum of the seed
transmission drops by more than a relative threshold.  Temperature tuning
maximizes the measured parametric gain coordinate-wise: first the pump
resonance via the side-temperature sum, then the forward/backward
interference via their difference, with the fundamental lock held
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .apparatus import Apparatus, sweep_phase  # noqa: F401  (sweep_phase re-exported)
from .errors import DomainError, LockLostError, LockProtocolError
from .optics import gain_from_minmax



@dataclass(frozen=True)
class LockController:
    """Frequency-walk lock state.

    One step of `step_size` MHz is emitted every `period` seconds; the walk
    direction flips when the observed seed-window maximum drops by more than
    `drop_threshold` relative to the previous observation.
    """

    step_size: float = 2.0  # MHz
    period: float = 0.1  # s
    direction: int = +1
    # runtime reference, not configuration: NaN until the first observation
    last_max: float = field(default=float("nan"), compare=False)
    drop_threshold: float = 0.005
    engaged: bool = False

    def __post_init__(self):
        if self.step_size <= 0.0 or self.period <= 0.0:
            raise DomainError("step size and period must be positive")
        if not 0.0 < self.drop_threshold < 1.0:
            raise DomainError("drop threshold must lie in (0, 1)")
        if self.direction not in (+1, -1):
            raise DomainError("direction must be +1 or -1")


def lock_update(ctrl: LockController, observed_max: float) -> tuple[LockController, float]:
    """One walk iteration: returns (new controller, frequency action in MHz).

    Pure transition: identical (state, observation) pairs give identical
    results.  The comparison reference is the best power seen since the last
    reversal; on a reversal it re-anchors to the dropped observation.  A
    reference that instead followed every window would ratchet down during a
    slow drift (each window dropping by less than the threshold) and let the
    walk wander far off the broad cavity line before reversing.
    """
    if not ctrl.engaged:
        raise LockProtocolError("lock_update called while disengaged")
    if observed_max < 0.0:
        raise DomainError("observed maximum must be >= 0")
    direction = ctrl.direction
    if math.isnan(ctrl.last_max):
        reference = observed_max
    elif observed_max < ctrl.last_max * (1.0 - ctrl.drop_threshold):
        direction = -direction
        reference = observed_max
    else:
        reference = max(ctrl.last_max, observed_max)
    new = replace(ctrl, direction=direction, last_max=reference)
    return new, direction * ctrl.step_size


def run_lock(
    apparatus: Apparatus,
    ctrl: LockController,
    duration_s: float,
) -> tuple[np.ndarray, np.ndarray, LockController]:
    """Run the walk for `duration_s`, stepping once per seed window.

    Returns (times, |effective detuning| trace, final controller).  The
    cumulative actuation cannot exceed step_size/period per second.
    """
    if not ctrl.engaged:
        raise LockProtocolError("engage the controller before running the lock")
    n = round(duration_s / apparatus.schedule.tick)
    times = np.empty(n)
    det = np.empty(n)
    for i in range(n):
        out = apparatus.step()
        times[i] = out.time_s
        det[i] = abs(out.detuning_mhz)
        if out.seed_window_done:
            ctrl, action = lock_update(ctrl, out.window_max_mw)
            apparatus.laser_detuning += action
    return times, det, ctrl


def acquire_lock(
    apparatus: Apparatus,
    ctrl: LockController,
    span_mhz: float = 400.0,
    coarse_step_mhz: float = 10.0,
) -> LockController:
    """Initial capture: coarse frequency scan, then engage the walk.

    Scans the laser across +-span around its current setting, parks where
    the single-tick seed transmission peaks (above half the best value seen)
    and returns the controller in the engaged state.
    """
    start = apparatus.laser_detuning
    candidates = np.arange(start - span_mhz, start + span_mhz + 1e-9, coarse_step_mhz)
    tpp = apparatus.schedule.ticks_per_period
    best_power, best_freq = -math.inf, start
    for f in candidates:
        apparatus.laser_detuning = float(f)
        power = max(out.d_r_mw for out in apparatus.run_ticks(tpp))
        if power > best_power:
            best_power, best_freq = power, float(f)
        if best_power > 0.5 * apparatus.seed_power_mw and power < 0.5 * best_power:
            break  # already past the line: transmission fell below half peak
    apparatus.laser_detuning = best_freq
    return replace(ctrl, engaged=True, last_max=float("nan"))


@dataclass(frozen=True)
class TempOptimizer:
    """Coordinate-wise gain maximization over (T_S, T_D).

    stage      blue_resonance -> interference -> done, never backwards
    probe_step initial probe around the current point (deg C)
    shrink     interval reduction ratio of the section search
    tolerance  temperature resolution at which a stage stops (deg C)
    """

    stage: str = "blue_resonance"
    probe_step: float = 0.02
    shrink: float = 2.0 / (1.0 + math.sqrt(5.0))  # golden ratio section
    tolerance: float = 0.004
    t_min: float = 15.0
    t_max: float = 60.0

    def __post_init__(self):
        if self.probe_step <= 0.0 or self.tolerance <= 0.0:
            raise DomainError("probe step and tolerance must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise DomainError("shrink factor must lie in (0, 1)")
        if self.stage not in ("blue_resonance", "interference", "done"):
            raise DomainError(f"unknown stage {self.stage!r}")


def measure_gain(
    apparatus: Apparatus,
    ctrl: LockController,
    n_windows: int = 2,
) -> tuple[float, LockController]:
    """Mean per-window gain from the seed extrema, with the lock running."""
    gains = []
    guard = 0
    max_ticks = (n_windows + 2) * apparatus.schedule.ticks_per_period
    while len(gains) < n_windows and guard < max_ticks:
        out = apparatus.step()
        guard += 1
        if out.seed_window_done:
            if ctrl.engaged:
                ctrl, action = lock_update(ctrl, out.window_max_mw)
                apparatus.laser_detuning += action
            if out.window_min_mw > 0.0:
                gains.append(gain_from_minmax(out.window_max_mw, out.window_min_mw))
    if not gains:
        raise DomainError("no complete seed window observed")
    return float(np.mean(gains)), ctrl


def optimize_temperatures(
    apparatus: Apparatus,
    opt: TempOptimizer,
    pump_power: float,
    ctrl: LockController | None = None,
    lock_loss_limit_mhz: float | None = None,
) -> tuple[float, float, float]:
    """Maximize measured gain over T_S then T_D without dropping the lock.

    Returns (T_S*, T_D*, achieved gain).  Aborts with LockLostError if the
    effective detuning leaves the cavity line during the search, and refuses
    to run when the gain signal is flat (pump off).
    """
    if ctrl is None:
        ctrl = LockController(engaged=True)
    if not ctrl.engaged:
        raise LockProtocolError("temperature optimization requires an engaged lock")
    if pump_power <= 0.0:
        raise DomainError("pump off: gain signal is flat, optimization impossible")
    apparatus.set_pump_power(pump_power)
    limit = lock_loss_limit_mhz if lock_loss_limit_mhz is not None else apparatus.cavity.hwhm_mhz

    state = {"ctrl": ctrl, "evaluations": []}

    def gain_at(T_S=None, T_D=None) -> float:
        if T_S is not None:
            lo, hi = opt.t_min, opt.t_max
            T_D_now = apparatus.thermal.T_D
            if not (lo <= T_S + 0.5 * abs(T_D_now) <= hi and lo <= T_S - 0.5 * abs(T_D_now) <= hi):
                raise DomainError(f"T_S candidate {T_S:.3f} outside safety bounds")
            apparatus.thermal = apparatus.thermal.with_sum_diff(T_S=T_S)
        if T_D is not None:
            s = apparatus.thermal.T_S
            t1, t2 = s + 0.5 * T_D, s - 0.5 * T_D
            if not (opt.t_min <= t1 <= opt.t_max and opt.t_min <= t2 <= opt.t_max):
                raise DomainError(f"T_D candidate {T_D:.3f} outside safety bounds")
            apparatus.thermal = apparatus.thermal.with_sum_diff(T_D=T_D)
        g, state["ctrl"] = measure_gain(apparatus, state["ctrl"])
        state["evaluations"].append((apparatus.thermal.T_S, apparatus.thermal.T_D, g))
        if abs(apparatus.effective_detuning()) > limit:
            raise LockLostError(
                f"fundamental lock lost at detuning {apparatus.effective_detuning():.1f} MHz"
            )
        return g

    g0 = gain_at()
    if g0 - 1.0 < 1e-4:
        raise DomainError("pump off or no parametric signal: gain is flat")

    stage_plan = []
    if opt.stage == "blue_resonance":
        stage_plan = ["blue_resonance", "interference"]
    elif opt.stage == "interference":
        stage_plan = ["interference"]

    for stage in stage_plan:
        if stage == "blue_resonance":
            center = apparatus.thermal.T_S
            half = apparatus.tuning.w_S
            _section_maximize(lambda T: gain_at(T_S=T), center, half, opt)
        else:
            center = apparatus.thermal.T_D
            half = apparatus.tuning.lambda_D / 4.0
            _section_maximize(lambda T: gain_at(T_D=T), center, half, opt)

    achieved, state["ctrl"] = measure_gain(apparatus, state["ctrl"])
    return apparatus.thermal.T_S, apparatus.thermal.T_D, achieved


def _section_maximize(f, center: float, half_width: float, opt: TempOptimizer) -> float:
    """Golden-section maximization with a cheap already-optimal shortcut.

    Probes center and center +- probe_step first; if neither probe improves
    on the center, the point is declared optimal (two probes, no movement).
    """
    g_center = f(center)
    g_plus = f(center + opt.probe_step)
    if g_plus <= g_center:
        g_minus = f(center - opt.probe_step)
        if g_minus <= g_center:
            f(center)  # restore the optimum
            return center

    lo, hi = center - half_width, center + half_width
    ratio = opt.shrink
    x1 = hi - ratio * (hi - lo)
    x2 = lo + ratio * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > opt.tolerance:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - ratio * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + ratio * (hi - lo)
            f2 = f(x2)
    best = 0.5 * (lo + hi)
    f(best)
    return best
