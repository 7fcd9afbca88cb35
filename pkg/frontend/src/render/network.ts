/** Influence network panel: directed graph with kind-colored nodes and
 * lag/correlation-labeled edges. Clicking an edge focuses the pair, clicking
 * a node focuses the entity (wired up via data-action attributes). */

import type { InfluenceGraphOut } from "../types.js";
import { forceLayout } from "../layout.js";
import { escapeXml, fmt, tag } from "./svg.js";

export const KIND_COLORS: Record<string, string> = {
  physical: "#c0392b",
  influencer: "#2980b9",
  community: "#27ae60",
  domain: "#8e44ad",
};

export interface NetworkRender {
  svg: string;
  nodeCount: number;
  edgeCount: number;
}

export function renderNetwork(
  payload: InfluenceGraphOut,
  runSeed: string,
  width = 640,
  height = 420,
): NetworkRender {
  const positions = forceLayout(
    payload.nodes.map((n) => n.id),
    payload.edges,
    runSeed,
    width,
    height,
  );
  const parts: string[] = [];
  parts.push(
    '<defs><marker id="arrow" viewBox="0 0 10 10" refX="22" refY="5" ' +
      'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
      '<path d="M 0 0 L 10 5 L 0 10 z" fill="#555"></path></marker></defs>',
  );
  for (const edge of payload.edges) {
    const a = positions.get(edge.source);
    const b = positions.get(edge.target);
    if (!a || !b) continue;
    const label = `lag ${edge.lag}, r=${fmt(edge.r)}`;
    parts.push(
      tag("g", { class: "edge", "data-action": "focus-pair", "data-a": edge.source, "data-b": edge.target },
        tag("line", {
          x1: fmt(a.x), y1: fmt(a.y), x2: fmt(b.x), y2: fmt(b.y),
          stroke: "#555", "stroke-width": 1.5, "marker-end": "url(#arrow)",
        }) +
        tag("text", {
          x: fmt((a.x + b.x) / 2), y: fmt((a.y + b.y) / 2 - 4),
          class: "edge-label", "text-anchor": "middle",
        }, escapeXml(label)),
      ),
    );
  }
  for (const node of payload.nodes) {
    const p = positions.get(node.id);
    if (!p) continue;
    parts.push(
      tag("g", { class: "node", "data-action": "focus-entity", "data-id": node.id },
        tag("circle", {
          cx: fmt(p.x), cy: fmt(p.y), r: 12,
          fill: KIND_COLORS[node.kind] ?? "#7f8c8d",
        }) +
        tag("text", {
          x: fmt(p.x), y: fmt(p.y + 24), class: "node-label", "text-anchor": "middle",
        }, escapeXml(node.label)),
      ),
    );
  }
  const svg = tag(
    "svg",
    { viewBox: `0 0 ${width} ${height}`, class: "network", role: "img" },
    parts.join(""),
  );
  return { svg, nodeCount: payload.nodes.length, edgeCount: payload.edges.length };
}
