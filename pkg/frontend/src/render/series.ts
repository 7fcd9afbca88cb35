/** Ideology time-series comparison for a focused pair.
 *
 * Both series render on the shared window grid; missing windows break the
 * polyline into separate segments rather than interpolating across the gap.
 * The drill-down's best lag is annotated above the chart.
 */

import type { PairDrilldownOut, SeriesOut } from "../types.js";
import { escapeXml, fmt, tag } from "./svg.js";

export interface SeriesRender {
  svg: string;
  annotation: string;
  gapCountA: number;
  gapCountB: number;
}

interface Segment {
  points: { x: number; y: number }[];
}

function axisValue(values: (number[] | null)[], axis: number): (number | null)[] {
  return values.map((v) => (v === null ? null : v[Math.min(axis, v.length - 1)]));
}

function segments(
  values: (number | null)[],
  scaleX: (i: number) => number,
  scaleY: (v: number) => number,
): Segment[] {
  const out: Segment[] = [];
  let current: Segment | null = null;
  values.forEach((value, i) => {
    if (value === null) {
      current = null;
      return;
    }
    if (current === null) {
      current = { points: [] };
      out.push(current);
    }
    current.points.push({ x: scaleX(i), y: scaleY(value) });
  });
  return out;
}

function polylines(segs: Segment[], color: string, cls: string): string {
  return segs
    .map((segment) =>
      segment.points.length === 1
        ? tag("circle", {
            cx: fmt(segment.points[0].x),
            cy: fmt(segment.points[0].y),
            r: 2.5,
            fill: color,
            class: cls,
          })
        : tag("polyline", {
            points: segment.points.map((p) => `${fmt(p.x)},${fmt(p.y)}`).join(" "),
            fill: "none",
            stroke: color,
            "stroke-width": 2,
            class: cls,
          }),
    )
    .join("");
}

export function renderSeriesPair(
  a: SeriesOut,
  b: SeriesOut,
  drill: PairDrilldownOut | null,
  width = 640,
  height = 260,
): SeriesRender {
  const n = Math.max(a.values.length, b.values.length);
  const axisA = drill?.best?.source === a.entity_id ? drill.best.source_axis ?? 0
    : drill?.best?.target === a.entity_id ? drill.best.target_axis ?? 0 : 0;
  const axisB = drill?.best?.source === b.entity_id ? drill.best.source_axis ?? 0
    : drill?.best?.target === b.entity_id ? drill.best.target_axis ?? 0 : 0;
  const va = axisValue(a.values, axisA);
  const vb = axisValue(b.values, axisB);
  const present = [...va, ...vb].filter((v): v is number => v !== null);
  const lo = present.length ? Math.min(...present, 0) : 0;
  const hi = present.length ? Math.max(...present, 1e-9) : 1;
  const margin = 34;
  const scaleX = (i: number) =>
    margin + (n <= 1 ? 0 : (i * (width - 2 * margin)) / (n - 1));
  const scaleY = (v: number) =>
    height - margin - ((v - lo) / (hi - lo || 1)) * (height - 2 * margin);

  const annotation = drill?.best
    ? `${drill.best.source} leads ${drill.best.target} by ${drill.best.lag} ` +
      `window(s), r=${fmt(drill.best.r, 3)}`
    : "no directed edge passes the threshold";

  const gapsOf = (values: (number | null)[]) =>
    values.filter((v) => v === null).length;

  const body =
    tag("text", { x: margin, y: 18, class: "annotation" }, escapeXml(annotation)) +
    polylines(segments(va, scaleX, scaleY), "#2980b9", "series-a") +
    polylines(segments(vb, scaleX, scaleY), "#c0392b", "series-b") +
    tag("text", { x: margin, y: height - 8, class: "legend" },
      escapeXml(`${a.entity_id} (blue) vs ${b.entity_id} (red)`));

  const svg = tag(
    "svg",
    { viewBox: `0 0 ${width} ${height}`, class: "series", role: "img" },
    body,
  );
  return { svg, annotation, gapCountA: gapsOf(va), gapCountB: gapsOf(vb) };
}
