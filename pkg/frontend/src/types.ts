/** Payload shapes of the read-only query API, mirrored field by field. */

export interface RunSummary {
  run_id: string;
  created_at: string;
  config_digest: string;
  parameters: Record<string, unknown>;
  stage_checksums: Record<string, string>;
  absent: string[];
}

export type EntityKind = "physical" | "influencer" | "community" | "domain";

export interface EntityOut {
  id: string;
  kind: EntityKind;
  label: string;
  size: number;
}

export interface GraphNodeOut {
  id: string;
  kind: EntityKind;
  label: string;
}

export interface InfluenceEdgeOut {
  source: string;
  target: string;
  lag: number;
  r: number;
  source_axis: number | null;
  target_axis: number | null;
}

export interface InfluenceGraphOut {
  nodes: GraphNodeOut[];
  edges: InfluenceEdgeOut[];
  min_corr: number;
  use_absolute: boolean;
}

export interface HeatmapOut {
  entities: string[];
  r: (number | null)[][];
  lag: (number | null)[][];
  lead: (string | null)[][];
}

export interface WindowOut {
  index: number;
  start: string;
  length_days: number;
}

export interface SeriesOut {
  entity_id: string;
  scalar: boolean;
  dim: number;
  windows: WindowOut[];
  values: (number[] | null)[];
}

export interface PairRowOut {
  source: string;
  target: string;
  lag: number;
  r: number | null;
  n: number;
  source_axis: number | null;
  target_axis: number | null;
}

export interface PairDrilldownOut {
  a: string;
  b: string;
  rows: PairRowOut[];
  best: InfluenceEdgeOut | null;
}

export interface PostOut {
  post_id: string;
  timestamp: string;
  excerpt: string;
  engagement: number;
}

export interface EntityDetailOut {
  entity_id: string;
  kind: EntityKind;
  label: string;
  posts: PostOut[];
}
