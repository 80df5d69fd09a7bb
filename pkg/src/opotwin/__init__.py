"""opotwin: a desk-scale digital twin of a monolithic-OPO squeezing experiment.

Layers:

* `optics`    — closed-form gain/threshold/squeezing relations (pure functions)
* `apparatus` — time-stepped virtual experiment with seeded noise synthesis
* `control`   — frequency-walk lock and coordinate-wise temperature tuning
* `analysis`  — threshold/shot-noise fits, electronic-noise correction,
                robust trace extrema
* `commands`  — gain-curve, noise-scan and squeeze-run pipelines
* `session`   — NDJSON-over-TCP operator endpoint with deterministic replay
* `cli`       — the `opotwin` command
"""

from .analysis import (
    GainPoint,
    NoisePoint,
    SqueezeResult,
    correct_electronic,
    db_from_linear,
    extract_minmax,
    fit_shot_noise,
    fit_threshold,
    linear_from_db,
)
from .apparatus import (
    Apparatus,
    DetectorModel,
    DriftConfig,
    NoiseTrace,
    SAConfig,
    ScheduleConfig,
    homodyne_sample,
    lo_power_scan,
    mems_position,
    sa_zero_span,
    sweep_phase,
)
from .config import RunConfig, default_config_yaml, load_config, save_config
from .control import (
    LockController,
    TempOptimizer,
    acquire_lock,
    lock_update,
    measure_gain,
    optimize_temperatures,
    run_lock,
)
from .errors import (
    AboveThresholdError,
    CalibrationError,
    ConfigError,
    DomainError,
    FitError,
    InsufficientDataError,
    LockLostError,
    LockProtocolError,
    OpoTwinError,
    SimulationFault,
)
from .optics import (
    CavityParams,
    EfficiencyBudget,
    KerrState,
    ThermalState,
    TuningResponse,
    apply_passive_loss,
    gain_from_minmax,
    kerr_step,
    parametric_gain,
    pump_amplitude,
    quadrature_noise,
    threshold_power,
    tuning_factor,
)
from .session import Session, SessionMessage, SessionServer, replay_journal

__version__ = "0.1.0"
