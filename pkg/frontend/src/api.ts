/** Thin client over the query API. Only documented GET endpoints exist here;
 * the console never mutates server state. */

import type {
  EntityDetailOut,
  EntityOut,
  HeatmapOut,
  InfluenceGraphOut,
  PairDrilldownOut,
  RunSummary,
  SeriesOut,
} from "./types.js";

export interface GraphQuery {
  minCorr?: number;
  useAbsolute?: boolean;
  entities?: string[];
}

export interface PostsQuery {
  from?: number;
  to?: number;
  limit?: number;
}

const enc = encodeURIComponent;

export function runsUrl(): string {
  return "/api/v1/runs";
}

export function entitiesUrl(runId: string): string {
  return `/api/v1/runs/${enc(runId)}/entities`;
}

export function influenceGraphUrl(runId: string, query: GraphQuery = {}): string {
  const params = new URLSearchParams();
  if (query.minCorr !== undefined) params.set("min_corr", String(query.minCorr));
  if (query.useAbsolute !== undefined) params.set("use_absolute", String(query.useAbsolute));
  if (query.entities !== undefined && query.entities.length > 0) {
    params.set("entities", query.entities.join(","));
  }
  const suffix = params.toString();
  return `/api/v1/runs/${enc(runId)}/influence-graph${suffix ? "?" + suffix : ""}`;
}

export function heatmapUrl(runId: string): string {
  return `/api/v1/runs/${enc(runId)}/heatmap`;
}

export function seriesUrl(runId: string, entityId: string): string {
  return `/api/v1/runs/${enc(runId)}/entities/${enc(entityId)}/series`;
}

export function pairUrl(runId: string, a: string, b: string): string {
  return `/api/v1/runs/${enc(runId)}/pairs/${enc(a)}/${enc(b)}`;
}

export function postsUrl(runId: string, entityId: string, query: PostsQuery = {}): string {
  const params = new URLSearchParams();
  if (query.from !== undefined) params.set("from", String(query.from));
  if (query.to !== undefined) params.set("to", String(query.to));
  if (query.limit !== undefined) params.set("limit", String(query.limit));
  const suffix = params.toString();
  return `/api/v1/runs/${enc(runId)}/entities/${enc(entityId)}/posts${suffix ? "?" + suffix : ""}`;
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, { method: "GET", signal });
  if (!response.ok) {
    const body = await response.text();
    throw new Error(`GET ${url} -> ${response.status}: ${body}`);
  }
  return (await response.json()) as T;
}

export const client = {
  runs: (signal?: AbortSignal) => getJson<RunSummary[]>(runsUrl(), signal),
  entities: (runId: string, signal?: AbortSignal) =>
    getJson<EntityOut[]>(entitiesUrl(runId), signal),
  influenceGraph: (runId: string, query: GraphQuery, signal?: AbortSignal) =>
    getJson<InfluenceGraphOut>(influenceGraphUrl(runId, query), signal),
  heatmap: (runId: string, signal?: AbortSignal) =>
    getJson<HeatmapOut>(heatmapUrl(runId), signal),
  series: (runId: string, entityId: string, signal?: AbortSignal) =>
    getJson<SeriesOut>(seriesUrl(runId, entityId), signal),
  pair: (runId: string, a: string, b: string, signal?: AbortSignal) =>
    getJson<PairDrilldownOut>(pairUrl(runId, a, b), signal),
  posts: (runId: string, entityId: string, query: PostsQuery, signal?: AbortSignal) =>
    getJson<EntityDetailOut>(postsUrl(runId, entityId, query), signal),
};
