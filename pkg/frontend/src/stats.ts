/** Display transforms for the signal inspection panel. Raw readings come
 * from the server; these helpers only summarize what was fetched. */

import type { SignalsResponse } from "./types.js";

export interface SignalStats {
  signal: string;
  unit: string;
  mean: number | null;
  min: number | null;
  max: number | null;
  /** Rows with an actual reading for this signal. */
  n: number;
}

/** Per-signal mean/min/max over the fetched rows, missing readings skipped. */
export function selectionStats(resp: SignalsResponse): SignalStats[] {
  return resp.signals.map((signal, col) => {
    let sum = 0;
    let n = 0;
    let min = Infinity;
    let max = -Infinity;
    for (const row of resp.rows) {
      const v = row.values[col];
      if (v === null || v === undefined) continue;
      sum += v;
      n += 1;
      if (v < min) min = v;
      if (v > max) max = v;
    }
    return {
      signal,
      unit: resp.units[col] ?? "",
      mean: n ? sum / n : null,
      min: n ? min : null,
      max: n ? max : null,
      n,
    };
  });
}

/** First and last timestamp of the fetched rows (they arrive in row order,
 * not time order, so scan rather than index). */
export function timestampRange(resp: SignalsResponse): [string, string] | null {
  if (resp.rows.length === 0) return null;
  let lo = resp.rows[0]!.timestamp;
  let hi = lo;
  for (const row of resp.rows) {
    if (row.timestamp < lo) lo = row.timestamp;
    if (row.timestamp > hi) hi = row.timestamp;
  }
  return [lo, hi];
}

export interface StripSeries {
  signal: string;
  unit: string;
  /** Time-ordered (timestamp, value) pairs; null marks a gap. */
  points: { timestamp: string; value: number | null }[];
}

/** Time-ordered series for one signal column of the fetched rows. */
export function stripSeries(resp: SignalsResponse, col: number): StripSeries {
  const points = resp.rows
    .map((row) => ({ timestamp: row.timestamp, value: row.values[col] ?? null }))
    .sort((a, b) => (a.timestamp < b.timestamp ? -1 : a.timestamp > b.timestamp ? 1 : 0));
  return { signal: resp.signals[col] ?? `signal ${col}`, unit: resp.units[col] ?? "", points };
}
