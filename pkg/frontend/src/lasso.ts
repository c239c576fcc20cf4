/** Freehand selection geometry. The lasso operates in screen space over the
 * projected map; hit testing is plain even-odd ray casting. */

export interface Pt {
  x: number;
  y: number;
}

/** Even-odd rule; points exactly on an edge count as inside often enough. */
export function pointInPolygon(p: Pt, poly: readonly Pt[]): boolean {
  let inside = false;
  const n = poly.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const a = poly[i]!;
    const b = poly[j]!;
    const crosses = a.y > p.y !== b.y > p.y;
    if (crosses && p.x < ((b.x - a.x) * (p.y - a.y)) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

/** Indices of the points inside the polygon. Fewer than 3 vertices select
 * nothing: a degenerate lasso is a click, not a region. */
export function lassoSelect(points: readonly Pt[], polygon: readonly Pt[]): number[] {
  if (polygon.length < 3) return [];
  const hit: number[] = [];
  for (let i = 0; i < points.length; i++) {
    if (pointInPolygon(points[i]!, polygon)) hit.push(i);
  }
  return hit;
}

/** Regular polygon approximating a circle, for scripted selections. */
export function circlePolygon(cx: number, cy: number, r: number, sides = 64): Pt[] {
  const out: Pt[] = [];
  for (let i = 0; i < sides; i++) {
    const a = (2 * Math.PI * i) / sides;
    out.push({ x: cx + r * Math.cos(a), y: cy + r * Math.sin(a) });
  }
  return out;
}
