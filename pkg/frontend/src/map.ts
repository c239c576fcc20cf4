/** Data model behind the embedding map: fixed point coordinates, a swappable
 * coloring (cluster ids or state ids), and the current selection.
 *
 * Coordinates are fetched once; switching the coloring source never touches
 * them, which is what makes algorithm comparison cheap.
 */

import type { EmbeddingPoint, StateInfo } from "./types.js";

const PALETTE = [
  "#4c78a8",
  "#59a14f",
  "#e45756",
  "#f28e2b",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
  "#9c755f",
  "#bab0ac",
  "#1f77b4",
];

export const NOISE_COLOR = "#9aa0a6";

/** Stable color per label; -1 (noise) is always gray. */
export function colorFor(label: number): string {
  if (label < 0) return NOISE_COLOR;
  return PALETTE[label % PALETTE.length]!;
}

export interface LegendEntry {
  label: number;
  text: string;
  color: string;
  count: number;
}

export interface Extents {
  xmin: number;
  xmax: number;
  ymin: number;
  ymax: number;
}

export interface ScreenScales {
  sx: (x: number) => number;
  sy: (y: number) => number;
}

export type ColoringMode = "clusters" | "states";

export class MapView {
  readonly points: EmbeddingPoint[];
  readonly xs: Float64Array;
  readonly ys: Float64Array;
  /** One label per point, from the active coloring source; -1 = noise. */
  coloring: number[];
  mode: ColoringMode = "clusters";
  /** Named states keyed by state id, used for legend text in state mode. */
  states: Record<string, StateInfo> | null = null;
  selection = new Set<number>();

  constructor(points: EmbeddingPoint[]) {
    this.points = points;
    this.xs = new Float64Array(points.length);
    this.ys = new Float64Array(points.length);
    for (let i = 0; i < points.length; i++) {
      this.xs[i] = points[i]!.coords[0] ?? 0;
      this.ys[i] = points[i]!.coords[1] ?? 0;
    }
    this.coloring = new Array(points.length).fill(-1);
  }

  get isEmpty(): boolean {
    return this.points.length === 0;
  }

  /** Swap the per-point labels without touching coordinates. */
  setColoring(labels: number[], mode: ColoringMode, states: Record<string, StateInfo> | null = null): void {
    if (labels.length !== this.points.length) {
      throw new Error(`coloring has ${labels.length} labels for ${this.points.length} points`);
    }
    this.coloring = labels;
    this.mode = mode;
    this.states = states;
  }

  /** Replace the selection, dropping anything outside the displayed points. */
  setSelection(rows: Iterable<number>): void {
    const next = new Set<number>();
    for (const r of rows) {
      if (r >= 0 && r < this.points.length) next.add(r);
    }
    this.selection = next;
  }

  clearSelection(): void {
    this.selection = new Set();
  }

  extents(): Extents {
    if (this.isEmpty) return { xmin: 0, xmax: 1, ymin: 0, ymax: 1 };
    let xmin = Infinity;
    let xmax = -Infinity;
    let ymin = Infinity;
    let ymax = -Infinity;
    for (let i = 0; i < this.xs.length; i++) {
      const x = this.xs[i]!;
      const y = this.ys[i]!;
      if (x < xmin) xmin = x;
      if (x > xmax) xmax = x;
      if (y < ymin) ymin = y;
      if (y > ymax) ymax = y;
    }
    return { xmin, xmax, ymin, ymax };
  }

  /** Linear data->pixel scales with a fixed margin; y flipped for canvas. */
  scales(width: number, height: number, pad = 24): ScreenScales {
    const e = this.extents();
    const dx = e.xmax - e.xmin || 1;
    const dy = e.ymax - e.ymin || 1;
    const sx = (x: number) => pad + ((x - e.xmin) / dx) * (width - 2 * pad);
    const sy = (y: number) => height - pad - ((y - e.ymin) / dy) * (height - 2 * pad);
    return { sx, sy };
  }

  /** One legend entry per distinct label, noise last. In state mode entries
   * carry the practitioner's names. */
  legend(): LegendEntry[] {
    const counts = new Map<number, number>();
    for (const label of this.coloring) {
      counts.set(label, (counts.get(label) ?? 0) + 1);
    }
    const labels = [...counts.keys()].sort((a, b) => {
      if (a < 0) return 1;
      if (b < 0) return -1;
      return a - b;
    });
    return labels.map((label) => {
      let text = label < 0 ? "noise" : `cluster ${label}`;
      if (this.mode === "states" && label >= 0) {
        const info = this.states?.[String(label)];
        text = info ? `${info.name} (${info.tag})` : `state ${label}`;
      }
      return { label, text, color: colorFor(label), count: counts.get(label)! };
    });
  }
}
