/** Correlation heatmap: one cell per entity pair, diverging color scale over
 * [-1, 1] with 0 neutral. Cell clicks focus the pair for drill-down. */

import type { HeatmapOut } from "../types.js";
import { escapeXml, fmt, tag } from "./svg.js";

export interface HeatmapRender {
  svg: string;
  cellCount: number;
}

/** Diverging blue-white-red scale over [-1, 1]. */
export function heatColor(r: number | null): string {
  if (r === null) return "#f4f4f4";
  const v = Math.max(-1, Math.min(1, r));
  if (v >= 0) {
    const other = Math.round(255 * (1 - v));
    return `rgb(255,${other},${other})`;
  }
  const other = Math.round(255 * (1 + v));
  return `rgb(${other},${other},255)`;
}

export function renderHeatmap(
  payload: HeatmapOut,
  selected: string[] | null = null,
  cell = 34,
  labelSpace = 120,
): HeatmapRender {
  const visible = selected === null
    ? payload.entities
    : payload.entities.filter((id) => selected.includes(id));
  const index = new Map(payload.entities.map((id, i) => [id, i]));
  const parts: string[] = [];
  let cells = 0;
  visible.forEach((rowId, rowPos) => {
    const i = index.get(rowId)!;
    parts.push(
      tag("text", {
        x: labelSpace - 6,
        y: labelSpace + rowPos * cell + cell / 2 + 4,
        "text-anchor": "end",
        class: "axis-label",
      }, escapeXml(rowId)),
    );
    visible.forEach((colId, colPos) => {
      const j = index.get(colId)!;
      const r = payload.r[i][j];
      const lag = payload.lag[i][j];
      const title = r === null ? "undefined" : `r=${fmt(r, 3)} lag=${lag}`;
      cells += 1;
      parts.push(
        tag("g", {
          class: "cell",
          "data-action": "focus-cell",
          "data-a": rowId,
          "data-b": colId,
        },
          tag("rect", {
            x: labelSpace + colPos * cell,
            y: labelSpace + rowPos * cell,
            width: cell - 2,
            height: cell - 2,
            fill: heatColor(r),
          }, tag("title", {}, escapeXml(title))),
        ),
      );
    });
  });
  visible.forEach((colId, colPos) => {
    parts.push(
      tag("text", {
        x: labelSpace + colPos * cell + cell / 2,
        y: labelSpace - 8,
        class: "axis-label rotated",
        "text-anchor": "start",
        transform: `rotate(-45 ${labelSpace + colPos * cell + cell / 2} ${labelSpace - 8})`,
      }, escapeXml(colId)),
    );
  });
  const size = labelSpace + visible.length * cell + 10;
  const svg = tag(
    "svg",
    { viewBox: `0 0 ${size} ${size}`, class: "heatmap", role: "img" },
    parts.join(""),
  );
  return { svg, cellCount: cells };
}
