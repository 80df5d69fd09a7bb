// Plot preparation: rolling series -> screen-sized min/max buckets.
// Decimation keeps the arch envelopes intact at any zoom.

import { Series, PlotPoint } from "./state.js";

export interface Bucket {
  t: number;
  min: number;
  max: number;
}

export function decimate(series: Series, maxBuckets: number): Bucket[] {
  const pts = series.points;
  if (pts.length === 0) return [];
  if (pts.length <= maxBuckets) {
    return pts.map((p) => ({ t: p.t, min: p.v, max: p.v }));
  }
  const t0 = pts[0].t;
  const t1 = pts[pts.length - 1].t;
  const dt = (t1 - t0) / maxBuckets || 1;
  const buckets: Bucket[] = [];
  let i = 0;
  for (let b = 0; b < maxBuckets; b++) {
    const cut = b === maxBuckets - 1 ? Infinity : t0 + (b + 1) * dt;
    let min = Infinity;
    let max = -Infinity;
    let t = NaN;
    while (i < pts.length && pts[i].t < cut) {
      min = Math.min(min, pts[i].v);
      max = Math.max(max, pts[i].v);
      t = pts[i].t;
      i++;
    }
    if (isFinite(min)) buckets.push({ t, min, max });
  }
  return buckets;
}

/** Rebase a dBm series onto a reference level (the pump-off trace). */
export function relativeTo(series: Series, refDbm: number | null): Series {
  if (refDbm === null) return series;
  return {
    windowS: series.windowS,
    points: series.points.map((p: PlotPoint) => ({ t: p.t, v: p.v - refDbm })),
  };
}

export function seriesExtent(series: Series): { min: number; max: number } | null {
  if (series.points.length === 0) return null;
  let min = Infinity;
  let max = -Infinity;
  for (const p of series.points) {
    min = Math.min(min, p.v);
    max = Math.max(max, p.v);
  }
  return { min, max };
}
