// Thin DOM layer: mirrors the pure view models into elements and draws the
// scrolling plots on canvases.  No state lives here.

import { Control, Panel } from "./panels.js";
import { Bucket, decimate, relativeTo } from "./plots.js";
import { ConsoleState } from "./state.js";

export type ControlHandler = (id: string, value: number | boolean) => void;

export function renderPanelsInto(root: HTMLElement, panels: Panel[], onControl: ControlHandler): void {
  for (const panel of panels) {
    let box = root.querySelector<HTMLElement>(`[data-panel="${panel.id}"]`);
    if (!box) {
      box = document.createElement("fieldset");
      box.dataset.panel = panel.id;
      const legend = document.createElement("legend");
      legend.textContent = panel.title;
      box.appendChild(legend);
      root.appendChild(box);
    }
    for (const control of panel.controls) renderControl(box, control, onControl);
  }
}

function renderControl(box: HTMLElement, control: Control, onControl: ControlHandler): void {
  let row = box.querySelector<HTMLElement>(`[data-control="${control.id}"]`);
  if (!row) {
    row = document.createElement("label");
    row.dataset.control = control.id;
    row.className = "control-row";
    const name = document.createElement("span");
    name.className = "control-label";
    row.appendChild(name);
    box.appendChild(row);
    if (control.kind === "slider" || control.kind === "number") {
      const input = document.createElement("input");
      input.type = control.kind === "slider" ? "range" : "number";
      input.addEventListener("input", () => onControl(control.id, Number(input.value)));
      row.appendChild(input);
      const val = document.createElement("span");
      val.className = "control-value";
      row.appendChild(val);
    } else if (control.kind === "toggle") {
      const input = document.createElement("input");
      input.type = "checkbox";
      input.addEventListener("change", () => onControl(control.id, input.checked));
      row.appendChild(input);
    } else {
      const val = document.createElement("span");
      val.className = "control-value";
      row.appendChild(val);
    }
  }
  const label = row.querySelector<HTMLElement>(".control-label")!;
  if (control.kind === "readout") {
    label.textContent = control.label;
    row.querySelector<HTMLElement>(".control-value")!.textContent = control.text;
    return;
  }
  label.textContent = "unit" in control ? `${control.label} [${control.unit}]` : control.label;
  const input = row.querySelector("input")!;
  input.disabled = control.disabled;
  if (control.kind === "toggle") {
    input.checked = control.value;
    return;
  }
  input.min = String(control.min);
  input.max = String(control.max);
  input.step = String(control.step);
  if (document.activeElement !== input) input.value = String(control.value);
  const val = row.querySelector<HTMLElement>(".control-value");
  if (val) val.textContent = String(control.value);
}

export interface PlotSpec {
  canvasId: string;
  title: string;
  series: (state: ConsoleState) => { points: { t: number; v: number }[]; windowS: number };
  unit: string;
}

export const PLOTS: PlotSpec[] = [
  {
    canvasId: "plot-sa",
    title: "SA zero-span (rel. shot)",
    series: (s) => relativeTo(s.plots.sa, s.shotRefDbm),
    unit: "dB",
  },
  { canvasId: "plot-seed", title: "Seed transmission D_R", series: (s) => s.plots.seed, unit: "mW" },
  { canvasId: "plot-detuning", title: "Detuning", series: (s) => s.plots.detuning, unit: "MHz" },
  { canvasId: "plot-gain", title: "Parametric gain", series: (s) => s.plots.gain, unit: "" },
];

export function drawPlot(canvas: HTMLCanvasElement, buckets: Bucket[], unit: string): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#2a2f3a";
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  if (buckets.length < 2) return;
  let lo = Infinity;
  let hi = -Infinity;
  for (const b of buckets) {
    lo = Math.min(lo, b.min);
    hi = Math.max(hi, b.max);
  }
  if (!(isFinite(lo) && isFinite(hi))) return;
  const pad = (hi - lo) * 0.1 || 1;
  lo -= pad;
  hi += pad;
  const t0 = buckets[0].t;
  const t1 = buckets[buckets.length - 1].t;
  const x = (t: number) => ((t - t0) / (t1 - t0 || 1)) * (w - 8) + 4;
  const y = (v: number) => h - ((v - lo) / (hi - lo)) * (h - 8) - 4;
  ctx.strokeStyle = "#58d3a5";
  ctx.beginPath();
  for (const b of buckets) {
    ctx.moveTo(x(b.t), y(b.min));
    ctx.lineTo(x(b.t), y(b.max));
  }
  ctx.stroke();
  ctx.fillStyle = "#9aa4b2";
  ctx.font = "10px monospace";
  ctx.fillText(`${hi.toFixed(2)} ${unit}`, 6, 12);
  ctx.fillText(`${lo.toFixed(2)} ${unit}`, 6, h - 6);
}

export function drawAllPlots(state: ConsoleState, maxBuckets = 400): void {
  for (const spec of PLOTS) {
    const canvas = document.getElementById(spec.canvasId) as HTMLCanvasElement | null;
    if (canvas) drawPlot(canvas, decimate(spec.series(state) as never, maxBuckets), spec.unit);
  }
}
