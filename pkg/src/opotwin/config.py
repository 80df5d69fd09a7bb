"""Run configuration: one serializable bundle of every model default.

A run is reproducible from (RunConfig, command stream) alone.  The on-disk
format is a flat-sectioned YAML file; `default_config_yaml()` emits it with
a comment per value stating where the number comes from (measured constant
of the modeled experiment, calibrated twin default, or free choice).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .apparatus import DetectorModel, DriftConfig, SAConfig, ScheduleConfig
from .control import LockController, TempOptimizer
from .errors import ConfigError
from .optics import CavityParams, EfficiencyBudget, KerrState, ThermalState, TuningResponse


@dataclass(frozen=True)
class RunConfig:
    cavity: CavityParams = field(default_factory=CavityParams)
    budget: EfficiencyBudget = field(default_factory=EfficiencyBudget)
    tuning: TuningResponse = field(default_factory=TuningResponse)
    thermal: ThermalState | None = None  # None: start at the tuning optimum
    kerr: KerrState = field(default_factory=KerrState)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    sa: SAConfig = field(default_factory=SAConfig)
    detector: DetectorModel = field(default_factory=DetectorModel)
    drift: DriftConfig = field(default_factory=DriftConfig)
    lock: LockController = field(default_factory=LockController)
    optimizer: TempOptimizer = field(default_factory=TempOptimizer)
    seed_power_mw: float = 1.0
    lo_power_mw: float = 2.5
    squeeze_pump_w: float = 0.0135
    gain_curve_pump_w: tuple = (0.05, 0.10, 0.16, 0.24, 0.33, 0.43, 0.54, 0.66)
    noise_scan_lo_mw: tuple = (0.0, 0.375, 0.75, 1.125, 1.5, 1.875, 2.25, 2.625, 3.0)
    squeeze_duration_s: float = 20.0
    reference_duration_s: float = 6.0
    rng_seed: int = 12345
    out_dir: str = "runs"
    time_factor: float = 0.0  # 0: run as fast as possible (CLI); >0: paced

    def initial_thermal(self) -> ThermalState:
        if self.thermal is not None:
            return self.thermal
        return ThermalState(
            T_A=self.tuning.T_A_opt,
            T_1=self.tuning.T_S_opt + 0.5 * self.tuning.T_D_opt,
            T_2=self.tuning.T_S_opt - 0.5 * self.tuning.T_D_opt,
        )


_SECTIONS = {
    "cavity": CavityParams,
    "budget": EfficiencyBudget,
    "tuning": TuningResponse,
    "thermal": ThermalState,
    "kerr": KerrState,
    "schedule": ScheduleConfig,
    "sa": SAConfig,
    "detector": DetectorModel,
    "drift": DriftConfig,
    "lock": LockController,
    "optimizer": TempOptimizer,
}


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = dataclasses.asdict(v)
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    return out


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    kwargs = {}
    valid = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"unknown config section or key: {key!r}")
        if key in _SECTIONS:
            if value is None:
                kwargs[key] = None
                continue
            cls = _SECTIONS[key]
            try:
                kwargs[key] = cls(**value)
            except ConfigError:
                raise
            except Exception as exc:  # bad field names or values out of domain
                raise ConfigError(f"bad [{key}] section: {exc}") from exc
        elif key in ("gain_curve_pump_w", "noise_scan_lo_mw"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except Exception as exc:  # dataclass validation
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(data or {})


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def default_config_yaml() -> str:
    """The documented default configuration file."""
    pi = math.pi
    return f"""\
# opotwin run configuration.  Every value is either a constant of the modeled
# experiment, a twin calibration (marked "calibrated"), or a free default.

cavity:
  T_out: 0.14              # fundamental output-coupler transmission
  T_pump: 0.31             # pump input-coupler transmission
  bandwidth_fwhm: 250.0    # fundamental cavity FWHM, MHz
  d_per_cm: 0.00106        # single-pass conversion efficiency, W^-1 cm^-1
  crystal_length_cm: 0.70  # calibrated: makes d_per_cm consistent with the
                           # 870 mW threshold (E_NL = 7.42e-4 W^-1)

budget:                    # detection-chain efficiency factors (eta_hom enters squared)
  eta_det: 0.90            # detector quantum efficiency
  eta_hom: 0.98            # homodyne visibility
  eta_loss: 0.95           # propagation transmission
  eta_cav: 0.95            # cavity escape efficiency

tuning:                    # phenomenological tuning landscape (free defaults)
  T_A_opt: 34.20           # phase-matching optimum, deg C
  T_S_opt: 35.10           # pump-resonance optimum, deg C
  T_D_opt: 0.30            # interference optimum, deg C
  w_A: 0.5                 # sinc^2 acceptance width, deg C
  w_S: 0.2                 # Lorentzian pump-resonance half width, deg C
  lambda_D: 1.0            # interference period, deg C

thermal: null              # null: start the crystal at the tuning optimum

kerr:
  shift: 0.0               # MHz
  tau_s: 12.0              # relaxation time constant, s
  coupling: 0.0            # MHz per W circulating; 0 disables the effect

schedule:
  mems_rate: 10.0          # seed/LO switching rate, Hz
  duty: 0.5                # seed fraction of each period
  sweep_span: {10 * pi:.17g}   # pump-phase sweep per seed window, rad (10 pi)
  tick: 0.001              # simulation step, s
  waveform: triangle

sa:
  center_freq: 10.0        # zero-span center, MHz
  rbw: 3.0                 # resolution bandwidth, MHz
  vbw: 100.0               # video bandwidth, Hz
  mode: zero-span

detector:
  electronic_noise_dbm: -70.75    # floor per 3 MHz RBW, LO-independent
  shot_noise_1mw_dbm: -71.704776  # calibrated: clearance ~3.0 at 2.5 mW LO
  reference_rbw_mhz: 3.0
  bandwidth_mhz: 45.0

drift:
  sigma_mhz_sqrt_s: 0.5    # resonance random walk
  ramp_mhz_s: 1.0          # slow thermal ramp; unlocked, the cavity leaves
                           # its 250 MHz line in a couple of minutes

lock:
  step_size: 2.0           # MHz per walk step
  period: 0.1              # s between steps
  direction: 1
  last_max: .nan
  drop_threshold: 0.005    # relative drop that reverses the walk
  engaged: false

optimizer:
  stage: blue_resonance
  probe_step: 0.02         # deg C
  shrink: {2 / (1 + math.sqrt(5)):.17g}     # golden-section ratio
  tolerance: 0.004         # deg C
  t_min: 15.0              # temperature safety bounds, deg C
  t_max: 60.0

seed_power_mw: 1.0         # free default; only ratios matter downstream
lo_power_mw: 2.5           # LO power of the squeezing measurement
squeeze_pump_w: 0.0135     # calibrated: reproduces the observed raw -1.0/+1.2 dB
gain_curve_pump_w: [0.05, 0.10, 0.16, 0.24, 0.33, 0.43, 0.54, 0.66]
noise_scan_lo_mw: [0.0, 0.375, 0.75, 1.125, 1.5, 1.875, 2.25, 2.625, 3.0]
squeeze_duration_s: 20.0
reference_duration_s: 6.0
rng_seed: 12345
out_dir: runs
time_factor: 0.0           # 0 = free-running; operator sessions use >= 1
"""
