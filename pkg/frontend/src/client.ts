// Transport-agnostic session client: wire any duplex text stream (browser
// WebSocket via the bridge, or a raw TCP socket under Node) to the reducer.

import { CommandEncoder, LineDecoder, parseMessage, SessionMessage } from "./protocol.js";
import { ConsoleEvent } from "./state.js";

export interface Transport {
  send(data: string): void;
  onData(cb: (chunk: string) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export class SessionClient {
  private encoder = new CommandEncoder();
  private decoder = new LineDecoder();
  private listeners: ((ev: ConsoleEvent) => void)[] = [];

  constructor(private transport: Transport) {
    transport.onData((chunk) => {
      for (const line of this.decoder.push(chunk)) {
        const msg = parseMessage(line);
        if (msg) this.emit({ type: "message", message: msg });
      }
    });
    transport.onClose(() => this.emit({ type: "disconnected" }));
  }

  start(): void {
    this.emit({ type: "connected" });
  }

  onEvent(cb: (ev: ConsoleEvent) => void): void {
    this.listeners.push(cb);
  }

  /** Send one command; the matching event lands in the reducer first. */
  command(name: string, payload: Record<string, unknown> = {}): number {
    const { line, seq } = this.encoder.next(name, payload);
    this.emit({ type: "command", name, payload, seq });
    this.transport.send(line);
    return seq;
  }

  close(): void {
    this.transport.close();
  }

  private emit(ev: ConsoleEvent): void {
    for (const cb of this.listeners) cb(ev);
  }
}

/** Browser transport: WebSocket to the ws<->tcp bridge. */
export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  const dataCbs: ((chunk: string) => void)[] = [];
  const closeCbs: (() => void)[] = [];
  ws.onmessage = (ev) => {
    const text = typeof ev.data === "string" ? ev.data : "";
    for (const cb of dataCbs) cb(text);
  };
  ws.onclose = () => {
    for (const cb of closeCbs) cb();
  };
  return {
    send: (data) => ws.send(data),
    onData: (cb) => dataCbs.push(cb),
    onClose: (cb) => closeCbs.push(cb),
    close: () => ws.close(),
  };
}
