"""Operator session: newline-delimited JSON over one duplex TCP socket.

One commanding session at a time drives the stepped apparatus.  The session
advances in 50 ms frames (20 Hz telemetry); queued commands are applied
between frames, journaled with the frame index at which they took effect,
and each receives exactly one ack or error.  Timestamps are simulation
time, so a journal replayed against the same RunConfig reproduces the
telemetry stream byte for byte.

Message shapes (one JSON object per line):

  command   {"kind": "command", "name": ..., "payload": {...}, "seq": n}
  ack       {"kind": "ack", "name": ..., "seq": m, "timestamp": t,
             "payload": {"command_seq": n, "applied_frame": k, ...}}
  error     {"kind": "error", "name": ..., "seq": m, "timestamp": t,
             "payload": {"command_seq": n, "code": ..., "message": ...}}
  telemetry {"kind": "telemetry", "name": "frame", "seq": m, "timestamp": t,
             "payload": {...snapshot..., "trace": [[t, phase, dbm, mems], ...]}}
"""

from __future__ import annotations

import json
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, replace

from .commands import build_apparatus
from .config import RunConfig
from .control import acquire_lock, lock_update
from .errors import DomainError, OpoTwinError

TELEMETRY_PERIOD_S = 0.05  # 20 Hz


@dataclass(frozen=True)
class SessionMessage:
    kind: str  # command | telemetry | ack | error
    name: str
    payload: dict
    seq: int
    timestamp: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "name": self.name,
                "payload": self.payload,
                "seq": self.seq,
                "timestamp": self.timestamp,
            },
            sort_keys=True,
        )


class CommandRejected(OpoTwinError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class Session:
    """Deterministic session core: command dispatch + framed stepping.

    The socket server and journal replay both drive this class, so a live
    session and its replay share one code path.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.apparatus = build_apparatus(config)
        self.lock = config.lock
        self.frame_index = 0
        self.out_seq = 0
        self.journal: list[dict] = []
        self.frame_ticks = max(1, round(TELEMETRY_PERIOD_S / config.schedule.tick))
        self._vbw_acc = None

    # -- commands ------------------------------------------------------------

    def apply(self, name: str, payload: dict | None) -> dict:
        """Apply one operator command between frames; returns the ack payload."""
        payload = payload or {}
        handler = getattr(self, f"_cmd_{name}", None)
        if handler is None or name.startswith("_"):
            raise CommandRejected("unknown_command", f"unknown command {name!r}")
        try:
            result = handler(payload) or {}
        except CommandRejected:
            raise
        except (DomainError, OpoTwinError) as exc:
            raise CommandRejected("rejected", str(exc)) from exc
        except (TypeError, KeyError, ValueError) as exc:
            raise CommandRejected("bad_payload", f"bad payload for {name}: {exc}") from exc
        if name not in ("ping", "export_journal"):  # read-only commands stay out of the journal
            self.journal.append({"frame": self.frame_index, "name": name, "payload": payload})
        result["applied_frame"] = self.frame_index
        return result

    def _cmd_ping(self, payload):
        return {"pong": True}

    def _cmd_set_temperature(self, payload):
        self.apparatus.set_temperatures(
            T_A=payload.get("t_a"), T_1=payload.get("t_1"), T_2=payload.get("t_2")
        )
        th = self.apparatus.thermal
        return {"T_A": th.T_A, "T_1": th.T_1, "T_2": th.T_2, "T_S": th.T_S, "T_D": th.T_D}

    def _cmd_set_pump_power(self, payload):
        self.apparatus.set_pump_power(float(payload["watts"]))
        return {"pump_w": self.apparatus.pump_power}

    def _cmd_set_lo_power(self, payload):
        self.apparatus.set_lo_power(float(payload["mw"]))
        return {"lo_mw": self.apparatus.lo_power_mw}

    def _cmd_set_seed_power(self, payload):
        self.apparatus.set_seed_power(float(payload["mw"]))
        return {"seed_mw": self.apparatus.seed_power_mw}

    def _cmd_engage_lock(self, payload):
        self.lock = replace(self.lock, engaged=True, last_max=float("nan"))
        return {"engaged": True}

    def _cmd_disengage_lock(self, payload):
        self.lock = replace(self.lock, engaged=False)
        return {"engaged": False}

    def _cmd_acquire_lock(self, payload):
        span = float(payload.get("span_mhz", 400.0))
        self.lock = acquire_lock(self.apparatus, self.lock, span_mhz=span)
        return {"engaged": True, "laser_detuning_mhz": self.apparatus.laser_detuning}

    def _cmd_start_sweep(self, payload):
        self.apparatus.sweep_on = True
        return {"sweep_on": True}

    def _cmd_stop_sweep(self, payload):
        self.apparatus.sweep_on = False
        return {"sweep_on": False}

    def _cmd_set_sa(self, payload):
        self.apparatus.set_sa(
            center_freq=payload.get("center_mhz"),
            rbw=payload.get("rbw_mhz"),
            vbw=payload.get("vbw_hz"),
        )
        sa = self.apparatus.sa
        return {"center_mhz": sa.center_freq, "rbw_mhz": sa.rbw, "vbw_hz": sa.vbw}

    def _cmd_insert_filter(self, payload):
        self.apparatus.set_filter(float(payload["transmission"]))
        return {"filter_transmission": self.apparatus.filter_transmission}

    def _cmd_remove_filter(self, payload):
        self.apparatus.set_filter(None)
        return {"filter_transmission": None}

    def _cmd_export_journal(self, payload):
        return {"journal": list(self.journal)}

    # -- stepping ------------------------------------------------------------

    def frame(self) -> SessionMessage:
        """Advance one telemetry frame (50 ms of simulation)."""
        alpha = 1.0 - math.exp(-2.0 * math.pi * self.apparatus.sa.vbw * self.apparatus.schedule.tick)
        rows = []
        for _ in range(self.frame_ticks):
            out = self.apparatus.step()
            if self._vbw_acc is None:
                self._vbw_acc = out.band_power_mw
            self._vbw_acc += alpha * (out.band_power_mw - self._vbw_acc)
            dbm = 10.0 * math.log10(max(self._vbw_acc, 1e-30))
            rows.append(
                [
                    round(out.time_s, 6),
                    round(out.pump_phase, 9),
                    round(dbm, 6),
                    out.mems,
                    round(out.d_r_mw, 9),
                    round(out.detuning_mhz, 6),
                ]
            )
            if out.seed_window_done and self.lock.engaged:
                self.lock, action = lock_update(self.lock, out.window_max_mw)
                self.apparatus.laser_detuning += action
        self.frame_index += 1
        snap = self.apparatus.snapshot()
        gain = snap["gain_estimate"]
        payload = {
            "frame": self.frame_index,
            "time_s": snap["time_s"],
            "laser_detuning_mhz": snap["laser_detuning_mhz"],
            "effective_detuning_mhz": round(snap["effective_detuning_mhz"], 6),
            "pump_w": snap["pump_power_w"],
            "lo_mw": snap["lo_power_mw"],
            "seed_mw": snap["seed_power_mw"],
            "T_A": snap["T_A"],
            "T_1": snap["T_1"],
            "T_2": snap["T_2"],
            "T_S": snap["T_S"],
            "T_D": snap["T_D"],
            "tuning_factor": round(snap["tuning_factor"], 9),
            "mems": snap["mems"],
            "sweep_on": snap["sweep_on"],
            "lock_engaged": self.lock.engaged,
            "lock_direction": self.lock.direction,
            "filter_transmission": snap["filter_transmission"],
            "gain_estimate": None if math.isnan(gain) else round(gain, 6),
            "sa": {
                "center_mhz": self.apparatus.sa.center_freq,
                "rbw_mhz": self.apparatus.sa.rbw,
                "vbw_hz": self.apparatus.sa.vbw,
            },
            "trace": rows,
        }
        self.out_seq += 1
        return SessionMessage("telemetry", "frame", payload, self.out_seq, snap["time_s"])

    def reply(self, kind: str, name: str, payload: dict) -> SessionMessage:
        self.out_seq += 1
        return SessionMessage(kind, name, payload, self.out_seq, self.apparatus.clock)


def replay_journal(config: RunConfig, journal: list[dict], n_frames: int) -> list[str]:
    """Re-run a recorded command stream; returns telemetry JSON lines."""
    session = Session(config)
    by_frame: dict[int, list[dict]] = {}
    for entry in journal:
        by_frame.setdefault(int(entry["frame"]), []).append(entry)
    lines = []
    for _ in range(n_frames):
        for entry in by_frame.get(session.frame_index, []):
            session.apply(entry["name"], entry["payload"])
        lines.append(session.frame().to_json())
    return lines


class SessionServer:
    """Single-session TCP endpoint streaming NDJSON telemetry at 20 Hz.

    One client commands the apparatus at a time; on disconnect the
    apparatus pauses and waits for the next connection with its state
    intact.  `time_factor` scales simulation speed relative to wall clock;
    0 runs unpaced.
    """

    def __init__(self, config: RunConfig, port: int = 0, host: str = "127.0.0.1",
                 time_factor: float | None = None):
        self.config = config
        self.session = Session(config)
        self.time_factor = config.time_factor if time_factor is None else time_factor
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.host, self.port = self._sock.getsockname()[:2]
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self._sock.close()

    def serve_forever(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                self._serve_client(conn)
            finally:
                conn.close()

    def _serve_client(self, conn: socket.socket) -> None:
        conn.settimeout(0.05)
        commands: queue.Queue = queue.Queue()
        disconnected = threading.Event()

        def reader():
            buf = b""
            while not (self._stop.is_set() or disconnected.is_set()):
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not chunk:
                    break
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if line.strip():
                        commands.put(line)
            disconnected.set()

        t = threading.Thread(target=reader, daemon=True)
        t.start()
        wall_start = time.monotonic()
        frames_sent = 0
        try:
            while not (self._stop.is_set() or disconnected.is_set()):
                while True:
                    try:
                        line = commands.get_nowait()
                    except queue.Empty:
                        break
                    self._send(conn, self._handle_line(line))
                self._send(conn, self.session.frame())
                frames_sent += 1
                if self.time_factor > 0:
                    target = wall_start + frames_sent * TELEMETRY_PERIOD_S / self.time_factor
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
        except OSError:
            pass
        finally:
            disconnected.set()

    def _handle_line(self, line: bytes) -> SessionMessage:
        name, cmd_seq = "?", None
        try:
            msg = json.loads(line)
            name = str(msg.get("name", "?"))
            cmd_seq = msg.get("seq")
            if msg.get("kind") != "command":
                raise CommandRejected("bad_message", "expected kind=command")
            result = self.session.apply(name, msg.get("payload"))
            result["command_seq"] = cmd_seq
            return self.session.reply("ack", name, result)
        except CommandRejected as exc:
            return self.session.reply(
                "error", name, {"command_seq": cmd_seq, "code": exc.code, "message": str(exc)}
            )
        except json.JSONDecodeError as exc:
            return self.session.reply(
                "error", name, {"command_seq": cmd_seq, "code": "bad_json", "message": str(exc)}
            )

    @staticmethod
    def _send(conn: socket.socket, msg: SessionMessage) -> None:
        conn.sendall(msg.to_json().encode() + b"\n")
