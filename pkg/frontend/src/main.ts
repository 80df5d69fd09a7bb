// Browser entry: connect through the bridge, reduce every event into the
// console state, and mirror state into panels + plots on each frame.

import { SessionClient, webSocketTransport } from "./client.js";
import { CommandBus } from "./panels.js";
import { renderPanels } from "./panels.js";
import { drawAllPlots, renderPanelsInto } from "./dom.js";
import { ConsoleState, exportJournal, initialState, reduce } from "./state.js";

const BRIDGE_URL = (window as unknown as { OPOTWIN_BRIDGE?: string }).OPOTWIN_BRIDGE ?? "ws://127.0.0.1:8765";

let state: ConsoleState = initialState();
let client: SessionClient | null = null;
let bus: CommandBus | null = null;

function dispatch(ev: Parameters<typeof reduce>[1]): void {
  state = reduce(state, ev);
}

function connect(): void {
  const transport = webSocketTransport(BRIDGE_URL);
  client = new SessionClient(transport);
  bus = new CommandBus((name, payload) => client?.command(name, payload));
  client.onEvent(dispatch);
  client.start();
}

function onControl(id: string, value: number | boolean): void {
  if (state.connection !== "connected" || !bus) return; // disconnected: controls disabled
  bus.control(id, value);
}

function tick(): void {
  const root = document.getElementById("panels");
  if (root) renderPanelsInto(root, renderPanels(state), onControl);
  drawAllPlots(state);
  const banner = document.getElementById("reconnect");
  if (banner) banner.style.display = state.connection === "connected" ? "none" : "block";
  requestAnimationFrame(tick);
}

document.addEventListener("DOMContentLoaded", () => {
  document.getElementById("reconnect-btn")?.addEventListener("click", () => {
    bus?.flushCancel();
    client?.close();
    connect();
  });
  document.getElementById("export-journal")?.addEventListener("click", () => {
    const blob = new Blob([JSON.stringify(exportJournal(state), null, 2)], {
      type: "application/json",
    });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "session-journal.json";
    a.click();
  });
  connect();
  requestAnimationFrame(tick);
});
