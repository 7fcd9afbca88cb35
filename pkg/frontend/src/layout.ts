/** Deterministic force-directed layout.
 *
 * Positions depend only on (seed string, node ids, edges): the PRNG is
 * seeded from the run id, and the simulation runs a fixed number of steps,
 * so screenshots of the same run are reproducible.
 */

export interface LayoutEdge {
  source: string;
  target: string;
}

export interface Point {
  x: number;
  y: number;
}

export function hashString(text: string): number {
  let h = 2166136261 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619) >>> 0;
  }
  return h >>> 0;
}

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const STEPS = 150;
const REPULSION = 4000;
const SPRING = 0.02;
const SPRING_LENGTH = 90;
const CENTERING = 0.02;
const DAMPING = 0.85;

export function forceLayout(
  nodeIds: string[],
  edges: LayoutEdge[],
  seed: string,
  width = 640,
  height = 420,
): Map<string, Point> {
  const ids = [...nodeIds].sort();
  const rand = mulberry32(hashString(seed));
  const pos = new Map<string, Point>();
  const vel = new Map<string, Point>();
  for (const id of ids) {
    pos.set(id, {
      x: width / 2 + (rand() - 0.5) * width * 0.8,
      y: height / 2 + (rand() - 0.5) * height * 0.8,
    });
    vel.set(id, { x: 0, y: 0 });
  }
  const links = edges
    .filter((e) => pos.has(e.source) && pos.has(e.target) && e.source !== e.target)
    .map((e) => [e.source, e.target] as const);

  for (let step = 0; step < STEPS; step++) {
    const force = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));
    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = pos.get(ids[i])!;
        const b = pos.get(ids[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        let d2 = dx * dx + dy * dy;
        if (d2 < 1) {
          // deterministic nudge for coincident points
          dx = 0.5 + (i % 3);
          dy = 0.5 + (j % 3);
          d2 = dx * dx + dy * dy;
        }
        const f = REPULSION / d2;
        const d = Math.sqrt(d2);
        const fx = (dx / d) * f;
        const fy = (dy / d) * f;
        const fa = force.get(ids[i])!;
        const fb = force.get(ids[j])!;
        fa.x += fx;
        fa.y += fy;
        fb.x -= fx;
        fb.y -= fy;
      }
    }
    for (const [sourceId, targetId] of links) {
      const a = pos.get(sourceId)!;
      const b = pos.get(targetId)!;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const d = Math.max(1, Math.sqrt(dx * dx + dy * dy));
      const f = SPRING * (d - SPRING_LENGTH);
      const fa = force.get(sourceId)!;
      const fb = force.get(targetId)!;
      fa.x += (dx / d) * f;
      fa.y += (dy / d) * f;
      fb.x -= (dx / d) * f;
      fb.y -= (dy / d) * f;
    }
    for (const id of ids) {
      const p = pos.get(id)!;
      const v = vel.get(id)!;
      const f = force.get(id)!;
      f.x += (width / 2 - p.x) * CENTERING;
      f.y += (height / 2 - p.y) * CENTERING;
      v.x = (v.x + f.x * 0.02) * DAMPING;
      v.y = (v.y + f.y * 0.02) * DAMPING;
      p.x += v.x;
      p.y += v.y;
    }
  }
  for (const id of ids) {
    const p = pos.get(id)!;
    p.x = Math.min(width - 20, Math.max(20, p.x));
    p.y = Math.min(height - 20, Math.max(20, p.y));
  }
  return pos;
}
