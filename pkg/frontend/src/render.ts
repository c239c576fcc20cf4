/** Canvas painters. Deliberately thin: everything they draw is computed by
 * the pure modules, and a missing 2D context (headless DOM) makes every
 * painter a no-op so the surrounding app logic stays testable. */

import { circlePolygon, type Pt } from "./lasso.js";
import { colorFor, type MapView } from "./map.js";
import { DEV_THRESHOLD, devRange, type DevTrace } from "./scores.js";
import type { StripSeries } from "./stats.js";

function ctx2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext("2d");
  } catch {
    return null;
  }
}

export function paintMap(canvas: HTMLCanvasElement, view: MapView, lassoPath: Pt[] | null): void {
  const ctx = ctx2d(canvas);
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const { sx, sy } = view.scales(width, height);
  const r = view.points.length > 3000 ? 1.5 : 3;
  for (let i = 0; i < view.points.length; i++) {
    ctx.fillStyle = colorFor(view.coloring[i] ?? -1);
    ctx.beginPath();
    ctx.arc(sx(view.xs[i]!), sy(view.ys[i]!), r, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (view.selection.size) {
    ctx.strokeStyle = "#111";
    ctx.lineWidth = 1;
    for (const i of view.selection) {
      ctx.beginPath();
      ctx.arc(sx(view.xs[i]!), sy(view.ys[i]!), r + 2, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
  if (lassoPath && lassoPath.length > 1) {
    ctx.strokeStyle = "#444";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(lassoPath[0]!.x, lassoPath[0]!.y);
    for (const p of lassoPath.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

export function paintStrip(canvas: HTMLCanvasElement, series: StripSeries): void {
  const ctx = ctx2d(canvas);
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const values = series.points.map((p) => p.value).filter((v): v is number => v !== null);
  if (!values.length) return;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const n = series.points.length;
  ctx.strokeStyle = "#4c78a8";
  ctx.lineWidth = 1;
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < n; i++) {
    const v = series.points[i]!.value;
    if (v === null) {
      pen = false;
      continue;
    }
    const x = (i / Math.max(1, n - 1)) * (width - 8) + 4;
    const y = height - 4 - ((v - lo) / span) * (height - 8);
    if (pen) ctx.lineTo(x, y);
    else ctx.moveTo(x, y);
    pen = true;
  }
  ctx.stroke();
}

export function paintDevChart(canvas: HTMLCanvasElement, traces: DevTrace[]): void {
  const ctx = ctx2d(canvas);
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (!traces.length) return;
  const [lo, hi] = devRange(traces);
  const span = hi - lo || 1;
  const y = (v: number) => height - 20 - ((v - lo) / span) * (height - 40);
  // consistency line first so traces draw over it
  ctx.strokeStyle = "#c0392b";
  ctx.setLineDash([6, 4]);
  ctx.beginPath();
  ctx.moveTo(0, y(DEV_THRESHOLD));
  ctx.lineTo(width, y(DEV_THRESHOLD));
  ctx.stroke();
  ctx.setLineDash([]);
  const n = traces[0]!.points.length;
  traces.forEach((trace, t) => {
    ctx.strokeStyle = colorFor(trace.stateId >= 0 ? trace.stateId : t);
    ctx.lineWidth = 1;
    ctx.beginPath();
    let pen = false;
    for (let i = 0; i < n; i++) {
      const v = trace.points[i]?.dev ?? null;
      if (v === null) {
        pen = false;
        continue;
      }
      const px = (i / Math.max(1, n - 1)) * (width - 8) + 4;
      if (pen) ctx.lineTo(px, y(v));
      else ctx.moveTo(px, y(v));
      pen = true;
    }
    ctx.stroke();
  });
}

/** Scripted-selection helper shared with tests: a circle in screen space. */
export function screenCircle(cx: number, cy: number, r: number): Pt[] {
  return circlePolygon(cx, cy, r);
}
