/** Browser bootstrap: wires state, API calls and panel rendering together.
 * Each panel keeps one in-flight request; a newer request aborts the older
 * one so the latest interaction always wins. API failures surface in a
 * non-blocking banner and the stale view stays up.
 */

import { client } from "./api.js";
import {
  ViewState,
  clearFocus,
  focusEntity,
  focusPair,
  initialState,
  selectRun,
  setAbsolute,
  setThreshold,
  toggleEntity,
} from "./state.js";
import { renderDetail } from "./render/detail.js";
import { renderHeatmap } from "./render/heatmap.js";
import { renderNetwork } from "./render/network.js";
import { renderSelector } from "./render/selector.js";
import { renderSeriesPair } from "./render/series.js";
import type { EntityOut, HeatmapOut } from "./types.js";

let state: ViewState = initialState();
let entities: EntityOut[] = [];
let heatmapPayload: HeatmapOut | null = null;

const controllers = new Map<string, AbortController>();

function freshSignal(panel: string): AbortSignal {
  controllers.get(panel)?.abort();
  const controller = new AbortController();
  controllers.set(panel, controller);
  return controller.signal;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function banner(message: string | null): void {
  const box = el("error-banner");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function guard<T>(panel: string, work: Promise<T>, apply: (value: T) => void): void {
  work
    .then((value) => {
      banner(null);
      apply(value);
    })
    .catch((error: unknown) => {
      if ((error as Error).name === "AbortError") return;
      banner(String(error));
    });
}

function refreshSelector(): void {
  el("selector").innerHTML = renderSelector(
    entities,
    state.selected,
    state.minCorr,
    state.useAbsolute,
  );
}

function refreshNetwork(): void {
  if (!state.runId) return;
  guard(
    "network",
    client.influenceGraph(
      state.runId,
      {
        minCorr: state.minCorr,
        useAbsolute: state.useAbsolute,
        entities: state.selected.length === entities.length ? undefined : state.selected,
      },
      freshSignal("network"),
    ),
    (payload) => {
      el("network").innerHTML = renderNetwork(payload, state.runId ?? "").svg;
    },
  );
}

function refreshHeatmap(): void {
  if (!state.runId) return;
  if (heatmapPayload) {
    el("heatmap").innerHTML = renderHeatmap(heatmapPayload, state.selected).svg;
    return;
  }
  guard("heatmap", client.heatmap(state.runId, freshSignal("heatmap")), (payload) => {
    heatmapPayload = payload;
    el("heatmap").innerHTML = renderHeatmap(payload, state.selected).svg;
  });
}

function refreshSeries(): void {
  if (!state.runId || !state.focusedPair) {
    el("series").innerHTML = '<p class="empty">Click an edge or heatmap cell.</p>';
    return;
  }
  const [a, b] = state.focusedPair;
  const runId = state.runId;
  const signal = freshSignal("series");
  guard(
    "series",
    Promise.all([
      client.series(runId, a, signal),
      client.series(runId, b, signal),
      client.pair(runId, a, b, signal),
    ]),
    ([seriesA, seriesB, drill]) => {
      el("series").innerHTML = renderSeriesPair(seriesA, seriesB, drill).svg;
    },
  );
}

function refreshDetail(): void {
  if (!state.runId || !state.focusedEntity) {
    el("detail").innerHTML = renderDetail(null).html;
    return;
  }
  guard(
    "detail",
    client.posts(state.runId, state.focusedEntity, { limit: 25 }, freshSignal("detail")),
    (payload) => {
      el("detail").innerHTML = renderDetail(payload).html;
    },
  );
}

function refreshAll(): void {
  refreshSelector();
  refreshNetwork();
  refreshHeatmap();
  refreshSeries();
  refreshDetail();
}

function update(next: ViewState): void {
  state = next;
  refreshAll();
}

async function boot(): Promise<void> {
  const runs = await client.runs();
  if (runs.length === 0) {
    banner("no runs in the store yet; execute the pipeline first");
    return;
  }
  const runId = runs[0].run_id;
  entities = await client.entities(runId);
  heatmapPayload = null;
  update(selectRun(state, runId, entities.map((e) => e.id)));

  document.body.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!target) return;
    const action = target.dataset.action;
    if (action === "focus-pair" || action === "focus-cell") {
      const a = target.dataset.a!;
      const b = target.dataset.b!;
      if (a !== b) update(focusPair(focusEntity(state, a), a, b));
    } else if (action === "focus-entity") {
      update(focusEntity(state, target.dataset.id!));
    }
  });

  document.body.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    const action = target.dataset.action;
    if (action === "toggle-entity") {
      update(toggleEntity(state, target.dataset.id!));
    } else if (action === "set-threshold") {
      update(setThreshold(state, Number(target.value)));
    } else if (action === "set-absolute") {
      update(setAbsolute(state, target.checked));
    }
  });

  document.body.addEventListener("dblclick", () => update(clearFocus(state)));
}

boot().catch((error) => banner(String(error)));
