/** Seeded spring-electric (force-directed) layout.
 *
 * Edges pull their endpoints toward a rest length; all node pairs repel.
 * Deterministic for a given seed, so layouts are reproducible in tests.
 */

import type { ViewGraph } from "./viewgraph.js";

export interface Point {
  x: number;
  y: number;
}

export interface LayoutOptions {
  seed?: number;
  iterations?: number;
  restLength?: number;
}

/** mulberry32: tiny deterministic PRNG over a 32-bit state. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function layout(
  graph: ViewGraph,
  options: LayoutOptions = {},
  previous?: Map<number, Point>,
): Map<number, Point> {
  const { seed = 0, iterations = 600, restLength = 100 } = options;
  const ids = [...graph.nodes.keys()].sort((a, b) => a - b);
  const positions = new Map<number, Point>();
  if (ids.length === 0) return positions;
  if (ids.length === 1) {
    positions.set(ids[0], { x: 0, y: 0 });
    return positions;
  }

  const rng = mulberry32(seed);
  for (const id of ids) {
    const prior = previous?.get(id);
    positions.set(
      id,
      prior
        ? { x: prior.x, y: prior.y }
        : { x: (rng() - 0.5) * restLength * 2, y: (rng() - 0.5) * restLength * 2 },
    );
  }

  const edges = [...graph.edges.values()];
  let temperature = restLength;
  const cool = Math.pow(0.01, 1 / iterations);

  for (let step = 0; step < iterations; step++) {
    const force = new Map<number, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));

    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = positions.get(ids[i])!;
        const b = positions.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        let dist = Math.hypot(dx, dy);
        if (dist < 1e-6) {
          // deterministic nudge so coincident nodes separate
          dx = 1e-3 * (i + 1);
          dy = 1e-3 * (j + 1);
          dist = Math.hypot(dx, dy);
        }
        const repulsion = (restLength * restLength) / dist;
        const fa = force.get(ids[i])!;
        const fb = force.get(ids[j])!;
        fa.x += (dx / dist) * repulsion;
        fa.y += (dy / dist) * repulsion;
        fb.x -= (dx / dist) * repulsion;
        fb.y -= (dy / dist) * repulsion;
      }
    }

    for (const edge of edges) {
      const a = positions.get(edge.head)!;
      const b = positions.get(edge.tail)!;
      let dx = a.x - b.x;
      let dy = a.y - b.y;
      let dist = Math.hypot(dx, dy);
      if (dist < 1e-6) {
        dx = 1e-3;
        dy = 1e-3;
        dist = Math.hypot(dx, dy);
      }
      const attraction = (dist * dist) / restLength;
      const fa = force.get(edge.head)!;
      const fb = force.get(edge.tail)!;
      fa.x -= (dx / dist) * attraction;
      fa.y -= (dy / dist) * attraction;
      fb.x += (dx / dist) * attraction;
      fb.y += (dy / dist) * attraction;
    }

    for (const id of ids) {
      const f = force.get(id)!;
      const magnitude = Math.hypot(f.x, f.y);
      if (magnitude < 1e-12) continue;
      const step = Math.min(magnitude, temperature);
      const p = positions.get(id)!;
      p.x += (f.x / magnitude) * step;
      p.y += (f.y / magnitude) * step;
    }
    temperature *= cool;
  }

  // center the layout on the origin
  let cx = 0;
  let cy = 0;
  for (const p of positions.values()) {
    cx += p.x;
    cy += p.y;
  }
  cx /= ids.length;
  cy /= ids.length;
  for (const p of positions.values()) {
    p.x -= cx;
    p.y -= cy;
  }
  return positions;
}

export interface Box {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export function boundingBox(points: Point[]): Box {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  return {
    minX: Math.min(...xs),
    minY: Math.min(...ys),
    maxX: Math.max(...xs),
    maxY: Math.max(...ys),
  };
}

export function boxesOverlap(a: Box, b: Box): boolean {
  return a.minX <= b.maxX && b.minX <= a.maxX && a.minY <= b.maxY && b.minY <= a.maxY;
}
