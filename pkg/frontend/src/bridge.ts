// WebSocket <-> TCP bridge so the browser console can reach the session
// endpoint.  One websocket client maps to one TCP connection; text frames
// and socket bytes pass through untouched (both sides speak NDJSON).
//
// Usage: node dist/bridge.js [--listen 8765] [--backend 127.0.0.1:7870]

import net from "node:net";
import { WebSocketServer, WebSocket } from "ws";

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 && process.argv[i + 1] ? process.argv[i + 1] : fallback;
}

const listenPort = Number(arg("listen", "8765"));
const backend = arg("backend", "127.0.0.1:7870");
const [backendHost, backendPort] = backend.split(":");

const wss = new WebSocketServer({ port: listenPort });
console.log(`bridge listening on ws://127.0.0.1:${listenPort} -> tcp://${backend}`);

wss.on("connection", (ws: WebSocket) => {
  const sock = net.createConnection({ host: backendHost, port: Number(backendPort) });
  sock.setNoDelay(true);

  sock.on("data", (buf) => {
    if (ws.readyState === WebSocket.OPEN) ws.send(buf.toString("utf-8"));
  });
  sock.on("close", () => ws.close());
  sock.on("error", () => ws.close());

  ws.on("message", (data) => {
    sock.write(typeof data === "string" ? data : data.toString());
  });
  ws.on("close", () => sock.destroy());
  ws.on("error", () => sock.destroy());
});
