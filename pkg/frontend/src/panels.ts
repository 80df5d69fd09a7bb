// Control panels as pure view models plus a debounced command bus.
// renderPanels(state) -> data; the DOM layer only mirrors it.  Every user
// gesture funnels through the CommandBus, which guarantees one protocol
// command per settled control change.

import { ConsoleState } from "./state.js";

export interface SliderControl {
  kind: "slider";
  id: string;
  label: string;
  unit: string;
  min: number;
  max: number;
  step: number;
  value: number;
  disabled: boolean;
}

export interface ToggleControl {
  kind: "toggle";
  id: string;
  label: string;
  value: boolean;
  disabled: boolean;
}

export interface NumberControl {
  kind: "number";
  id: string;
  label: string;
  unit: string;
  value: number;
  min: number;
  max: number;
  step: number;
  disabled: boolean;
}

export interface Readout {
  kind: "readout";
  id: string;
  label: string;
  text: string;
}

export type Control = SliderControl | ToggleControl | NumberControl | Readout;

export interface Panel {
  id: string;
  title: string;
  controls: Control[];
}

function fmt(v: number | null | undefined, digits = 3): string {
  if (v === null || v === undefined || Number.isNaN(v)) return "--";
  return v.toFixed(digits);
}

export function renderPanels(state: ConsoleState): Panel[] {
  const f = state.latest;
  const offline = state.connection !== "connected";
  const dis = offline || f === null;

  const temps: Panel = {
    id: "temperatures",
    title: "Crystal temperatures",
    controls: [
      { kind: "slider", id: "t_a", label: "T_A", unit: "degC", min: 30, max: 40, step: 0.01, value: f?.T_A ?? 34.2, disabled: dis },
      { kind: "slider", id: "t_1", label: "T_1", unit: "degC", min: 30, max: 40, step: 0.01, value: f?.T_1 ?? 35.25, disabled: dis },
      { kind: "slider", id: "t_2", label: "T_2", unit: "degC", min: 30, max: 40, step: 0.01, value: f?.T_2 ?? 34.95, disabled: dis },
      { kind: "readout", id: "t_s", label: "T_S", text: `${fmt(f?.T_S)} degC` },
      { kind: "readout", id: "t_d", label: "T_D", text: `${fmt(f?.T_D)} degC` },
      { kind: "readout", id: "tuning", label: "tuning factor", text: fmt(f?.tuning_factor, 4) },
    ],
  };

  const beams: Panel = {
    id: "beams",
    title: "Pump / LO / seed",
    controls: [
      { kind: "number", id: "pump_mw", label: "pump power", unit: "mW", value: (f?.pump_w ?? 0) * 1e3, min: 0, max: 860, step: 0.1, disabled: dis },
      { kind: "number", id: "lo_mw", label: "LO power", unit: "mW", value: f?.lo_mw ?? 2.5, min: 0, max: 10, step: 0.1, disabled: dis },
      { kind: "number", id: "seed_mw", label: "seed power", unit: "mW", value: f?.seed_mw ?? 1.0, min: 0, max: 10, step: 0.1, disabled: dis },
      { kind: "readout", id: "gain", label: "parametric gain", text: fmt(f?.gain_estimate ?? null) },
    ],
  };

  const lock: Panel = {
    id: "lock",
    title: "Fundamental lock",
    controls: [
      { kind: "toggle", id: "lock_engaged", label: "lock engaged", value: f?.lock_engaged ?? false, disabled: dis },
      { kind: "toggle", id: "sweep_on", label: "pump phase sweep", value: f?.sweep_on ?? true, disabled: dis },
      { kind: "readout", id: "detuning", label: "detuning", text: `${fmt(f?.effective_detuning_mhz, 2)} MHz` },
      { kind: "readout", id: "direction", label: "walk direction", text: f ? (f.lock_direction > 0 ? "+" : "-") : "--" },
    ],
  };

  const sa: Panel = {
    id: "sa",
    title: "Spectrum analyzer",
    controls: [
      { kind: "number", id: "sa_center", label: "center", unit: "MHz", value: f?.sa.center_mhz ?? 10, min: 0.1, max: 45, step: 0.1, disabled: dis },
      { kind: "number", id: "sa_rbw", label: "RBW", unit: "MHz", value: f?.sa.rbw_mhz ?? 3, min: 0.1, max: 10, step: 0.1, disabled: dis },
      { kind: "number", id: "sa_vbw", label: "VBW", unit: "Hz", value: f?.sa.vbw_hz ?? 100, min: 1, max: 10000, step: 1, disabled: dis },
      { kind: "toggle", id: "filter_in", label: "50% filter in SV path", value: (f?.filter_transmission ?? null) !== null, disabled: dis },
      { kind: "readout", id: "shot_ref", label: "shot reference", text: state.shotRefDbm === null ? "--" : `${state.shotRefDbm.toFixed(2)} dBm` },
    ],
  };

  const session: Panel = {
    id: "session",
    title: "Session",
    controls: [
      { kind: "readout", id: "conn", label: "connection", text: state.connection },
      { kind: "readout", id: "sim_time", label: "sim time", text: `${fmt(f?.time_s, 2)} s` },
      { kind: "readout", id: "cmds", label: "commands / acks", text: `${state.commandsSent} / ${state.acksReceived}` },
      { kind: "readout", id: "errors", label: "errors", text: String(state.errors.length) },
    ],
  };

  return [temps, beams, lock, sa, session];
}

export type SendFn = (name: string, payload: Record<string, unknown>) => void;

/**
 * Debounces continuous controls (sliders, spinners) per control id so a
 * drag settles into exactly one command; discrete toggles send immediately.
 */
export class CommandBus {
  private timers = new Map<string, ReturnType<typeof setTimeout>>();

  constructor(private send: SendFn, private debounceMs = 100) {}

  private debounced(id: string, fire: () => void): void {
    const old = this.timers.get(id);
    if (old !== undefined) clearTimeout(old);
    this.timers.set(
      id,
      setTimeout(() => {
        this.timers.delete(id);
        fire();
      }, this.debounceMs)
    );
  }

  control(id: string, value: number | boolean): void {
    switch (id) {
      case "t_a":
        return this.debounced(id, () => this.send("set_temperature", { t_a: value }));
      case "t_1":
        return this.debounced(id, () => this.send("set_temperature", { t_1: value }));
      case "t_2":
        return this.debounced(id, () => this.send("set_temperature", { t_2: value }));
      case "pump_mw":
        return this.debounced(id, () => this.send("set_pump_power", { watts: (value as number) * 1e-3 }));
      case "lo_mw":
        return this.debounced(id, () => this.send("set_lo_power", { mw: value }));
      case "seed_mw":
        return this.debounced(id, () => this.send("set_seed_power", { mw: value }));
      case "sa_center":
        return this.debounced(id, () => this.send("set_sa", { center_mhz: value }));
      case "sa_rbw":
        return this.debounced(id, () => this.send("set_sa", { rbw_mhz: value }));
      case "sa_vbw":
        return this.debounced(id, () => this.send("set_sa", { vbw_hz: value }));
      case "lock_engaged":
        return this.send(value ? "engage_lock" : "disengage_lock", {});
      case "sweep_on":
        return this.send(value ? "start_sweep" : "stop_sweep", {});
      case "filter_in":
        return value
          ? this.send("insert_filter", { transmission: 0.5 })
          : this.send("remove_filter", {});
      default:
        throw new Error(`unknown control ${id}`);
    }
  }

  /** Cancel pending debounced sends (used on disconnect). */
  flushCancel(): void {
    for (const timer of this.timers.values()) clearTimeout(timer);
    this.timers.clear();
  }
}
