/** Deviation dashboard series. The chart plots the dimensionless dev index
 * (reconstruction error over the state's calibration threshold) so traces
 * are comparable across states; dev = 1 is the consistency line. */

import type { ScoreRow, ScoresResponse } from "./types.js";

export const DEV_THRESHOLD = 1.0;

export interface DevTrace {
  stateId: number;
  name: string;
  points: { timestamp: string; dev: number | null }[];
}

/** One trace per state in the bank's order, named by the practitioner's
 * labels when present. */
export function devTraces(resp: ScoresResponse): DevTrace[] {
  return resp.state_labels.map((stateId) => {
    const info = resp.states[String(stateId)];
    return {
      stateId,
      name: info ? info.name : `state ${stateId}`,
      points: resp.rows.map((row) => ({
        timestamp: row.timestamp,
        dev: row.dev[String(stateId)] ?? null,
      })),
    };
  });
}

export function median(values: readonly number[]): number {
  if (values.length === 0) return NaN;
  const sorted = [...values].sort((a, b) => a - b);
  const mid = sorted.length >> 1;
  return sorted.length % 2 ? sorted[mid]! : (sorted[mid - 1]! + sorted[mid]!) / 2;
}

/** Median dev against one state over the rows passing the filter. */
export function medianDev(
  resp: ScoresResponse,
  stateId: number,
  rowFilter: (row: ScoreRow) => boolean = () => true,
): number {
  const key = String(stateId);
  const values: number[] = [];
  for (const row of resp.rows) {
    if (!rowFilter(row)) continue;
    const v = row.dev[key];
    if (v !== null && v !== undefined) values.push(v);
  }
  return median(values);
}

/** Value range covering all traces plus the threshold line, padded. */
export function devRange(traces: readonly DevTrace[]): [number, number] {
  let lo = 0;
  let hi = DEV_THRESHOLD;
  for (const trace of traces) {
    for (const p of trace.points) {
      if (p.dev === null) continue;
      if (p.dev > hi) hi = p.dev;
      if (p.dev < lo) lo = p.dev;
    }
  }
  return [lo, hi * 1.05];
}
