// Console state and its reducer.  Rendering is a pure function of this
// state; the reducer is the only way it changes, so replaying the same
// event sequence reproduces the same state (and therefore the same plots).

import { SessionMessage, TelemetryPayload, telemetryPayload } from "./protocol.js";

export interface PlotPoint {
  t: number;
  v: number;
}

export interface Series {
  points: PlotPoint[];
  windowS: number;
}

export interface JournalEntry {
  seq: number;
  name: string;
  payload: Record<string, unknown>;
  appliedFrame: number | null; // filled in when the ack arrives
}

export interface ErrorInfo {
  commandSeq: number | null;
  code: string;
  message: string;
}

export interface ConsoleState {
  connection: "disconnected" | "connected";
  latest: TelemetryPayload | null;
  commandsSent: number;
  acksReceived: number;
  pendingAcks: Record<number, string>;
  journal: JournalEntry[];
  errors: ErrorInfo[];
  // 0 dB reference: rolling mean of LO-window SA power while the pump is off
  shotRefDbm: number | null;
  plots: {
    sa: Series; // SA power during LO windows, dBm
    seed: Series; // D_R transmission during seed windows, mW
    detuning: Series; // effective detuning, MHz
    gain: Series; // per-frame gain estimate
  };
}

export type ConsoleEvent =
  | { type: "connected" }
  | { type: "disconnected" }
  | { type: "command"; name: string; payload: Record<string, unknown>; seq: number }
  | { type: "message"; message: SessionMessage };

export const PLOT_WINDOW_S = 10;

export function initialState(windowS: number = PLOT_WINDOW_S): ConsoleState {
  const series = (): Series => ({ points: [], windowS });
  return {
    connection: "disconnected",
    latest: null,
    commandsSent: 0,
    acksReceived: 0,
    pendingAcks: {},
    journal: [],
    errors: [],
    shotRefDbm: null,
    plots: { sa: series(), seed: series(), detuning: series(), gain: series() },
  };
}

function pushPoints(series: Series, points: PlotPoint[]): Series {
  if (points.length === 0) return series;
  const all = series.points.concat(points);
  const tMax = all[all.length - 1].t;
  const cut = tMax - series.windowS;
  return { points: all.filter((p) => p.t >= cut), windowS: series.windowS };
}

function reduceTelemetry(state: ConsoleState, frame: TelemetryPayload): ConsoleState {
  const sa: PlotPoint[] = [];
  const seed: PlotPoint[] = [];
  const det: PlotPoint[] = [];
  for (const [t, , dbm, mems, dr, detuning] of frame.trace) {
    det.push({ t, v: detuning });
    if (mems === "lo") sa.push({ t, v: dbm });
    else seed.push({ t, v: dr });
  }
  const gain: PlotPoint[] =
    frame.gain_estimate === null ? [] : [{ t: frame.time_s, v: frame.gain_estimate }];

  // track the pump-off LO level as the 0 dB (shot) reference
  let shotRef = state.shotRefDbm;
  if (frame.pump_w === 0 && sa.length > 0) {
    const mean = sa.reduce((s, p) => s + p.v, 0) / sa.length;
    shotRef = shotRef === null ? mean : 0.9 * shotRef + 0.1 * mean;
  }

  return {
    ...state,
    latest: frame,
    shotRefDbm: shotRef,
    plots: {
      sa: pushPoints(state.plots.sa, sa),
      seed: pushPoints(state.plots.seed, seed),
      detuning: pushPoints(state.plots.detuning, det),
      gain: pushPoints(state.plots.gain, gain),
    },
  };
}

export function reduce(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.type) {
    case "connected":
      return { ...state, connection: "connected" };
    case "disconnected":
      return { ...state, connection: "disconnected" };
    case "command": {
      const entry: JournalEntry = {
        seq: event.seq,
        name: event.name,
        payload: event.payload,
        appliedFrame: null,
      };
      return {
        ...state,
        commandsSent: state.commandsSent + 1,
        pendingAcks: { ...state.pendingAcks, [event.seq]: event.name },
        journal: state.journal.concat([entry]), // append-only
      };
    }
    case "message": {
      const msg = event.message;
      if (msg.kind === "telemetry") {
        const frame = telemetryPayload(msg);
        return frame ? reduceTelemetry(state, frame) : state;
      }
      if (msg.kind === "ack") {
        const cmdSeq = msg.payload["command_seq"] as number | undefined;
        const applied = msg.payload["applied_frame"] as number | undefined;
        const pending = { ...state.pendingAcks };
        if (cmdSeq !== undefined) delete pending[cmdSeq];
        return {
          ...state,
          acksReceived: state.acksReceived + 1,
          pendingAcks: pending,
          journal: state.journal.map((e) =>
            e.seq === cmdSeq ? { ...e, appliedFrame: applied ?? null } : e
          ),
        };
      }
      if (msg.kind === "error") {
        const cmdSeq = (msg.payload["command_seq"] as number | null) ?? null;
        const pending = { ...state.pendingAcks };
        if (cmdSeq !== null) delete pending[cmdSeq];
        return {
          ...state,
          pendingAcks: pending,
          errors: state.errors.concat([
            {
              commandSeq: cmdSeq,
              code: String(msg.payload["code"] ?? "unknown"),
              message: String(msg.payload["message"] ?? ""),
            },
          ]),
        };
      }
      return state;
    }
  }
}

/** Server-side journal format accepted by the backend's replay helper. */
export function exportJournal(state: ConsoleState): { frame: number; name: string; payload: Record<string, unknown> }[] {
  return state.journal
    .filter((e) => e.appliedFrame !== null)
    .map((e) => ({ frame: e.appliedFrame as number, name: e.name, payload: e.payload }));
}
