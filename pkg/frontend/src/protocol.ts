// Session protocol: newline-delimited JSON over one duplex byte stream.
// Commands carry a client sequence number; every command is answered by
// exactly one ack or error whose payload echoes command_seq.

export type MessageKind = "command" | "telemetry" | "ack" | "error";

export interface SessionMessage {
  kind: MessageKind;
  name: string;
  payload: Record<string, unknown>;
  seq: number;
  timestamp: number;
}

// One SA/D_R sample inside a telemetry frame:
// [time_s, phase_rad, power_dbm, mems, d_r_mw, detuning_mhz]
export type TraceRow = [number, number, number, string, number, number];

export interface TelemetryPayload {
  frame: number;
  time_s: number;
  laser_detuning_mhz: number;
  effective_detuning_mhz: number;
  pump_w: number;
  lo_mw: number;
  seed_mw: number;
  T_A: number;
  T_1: number;
  T_2: number;
  T_S: number;
  T_D: number;
  tuning_factor: number;
  mems: string;
  sweep_on: boolean;
  lock_engaged: boolean;
  lock_direction: number;
  filter_transmission: number | null;
  gain_estimate: number | null;
  sa: { center_mhz: number; rbw_mhz: number; vbw_hz: number };
  trace: TraceRow[];
}

/** Splits an NDJSON byte stream into complete lines across chunk boundaries. */
export class LineDecoder {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines = this.buffer.split("\n");
    this.buffer = lines.pop() ?? "";
    return lines.filter((l) => l.trim().length > 0);
  }
}

export function parseMessage(line: string): SessionMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  const msg = raw as Partial<SessionMessage>;
  if (!msg || typeof msg.kind !== "string" || typeof msg.name !== "string") return null;
  return {
    kind: msg.kind as MessageKind,
    name: msg.name,
    payload: (msg.payload ?? {}) as Record<string, unknown>,
    seq: typeof msg.seq === "number" ? msg.seq : -1,
    timestamp: typeof msg.timestamp === "number" ? msg.timestamp : NaN,
  };
}

/** Builds command lines with a strictly increasing sequence number. */
export class CommandEncoder {
  private seq = 0;

  next(name: string, payload: Record<string, unknown> = {}): { line: string; seq: number } {
    this.seq += 1;
    const line =
      JSON.stringify({ kind: "command", name, payload, seq: this.seq }) + "\n";
    return { line, seq: this.seq };
  }
}

export function telemetryPayload(msg: SessionMessage): TelemetryPayload | null {
  if (msg.kind !== "telemetry") return null;
  return msg.payload as unknown as TelemetryPayload;
}
