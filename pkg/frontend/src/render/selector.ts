/** Entity selection bar: the single place where the view state mutates. */

import type { EntityOut } from "../types.js";
import { escapeXml, tag } from "./svg.js";

export function renderSelector(
  entities: EntityOut[],
  selected: string[],
  minCorr: number,
  useAbsolute: boolean,
): string {
  const chosen = new Set(selected);
  const boxes = entities
    .map((entity) =>
      tag(
        "label",
        { class: `entity-choice kind-${entity.kind}` },
        `<input type="checkbox" data-action="toggle-entity" data-id="${escapeXml(entity.id)}" ` +
          `${chosen.has(entity.id) ? "checked" : ""}>` +
          tag("span", {}, escapeXml(`${entity.label} [${entity.kind}, n=${entity.size}]`)),
      ),
    )
    .join("");
  const slider =
    `<label class="threshold">min correlation ` +
    `<input type="range" min="0" max="1" step="0.01" value="${minCorr}" data-action="set-threshold">` +
    `<output>${minCorr.toFixed(2)}</output></label>`;
  const absolute =
    `<label class="absolute"><input type="checkbox" data-action="set-absolute" ` +
    `${useAbsolute ? "checked" : ""}> absolute correlation</label>`;
  return tag("div", { class: "selector-bar" }, slider + absolute + tag("div", { class: "choices" }, boxes));
}
