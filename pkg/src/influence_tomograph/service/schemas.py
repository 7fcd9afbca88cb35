"""Response models for the read-only query API."""
from __future__ import annotations

from pydantic import BaseModel


class RunSummary(BaseModel):
    run_id: str
    created_at: str
    config_digest: str
    parameters: dict
    stage_checksums: dict[str, str]
    absent: list[str]


class EntityOut(BaseModel):
    id: str
    kind: str
    label: str
    size: int


class GraphNodeOut(BaseModel):
    id: str
    kind: str
    label: str


class InfluenceEdgeOut(BaseModel):
    source: str
    target: str
    lag: int
    r: float
    source_axis: int | None = None
    target_axis: int | None = None


class InfluenceGraphOut(BaseModel):
    nodes: list[GraphNodeOut]
    edges: list[InfluenceEdgeOut]
    min_corr: float
    use_absolute: bool


class HeatmapOut(BaseModel):
    entities: list[str]
    r: list[list[float | None]]
    lag: list[list[int | None]]
    lead: list[list[str | None]]


class WindowOut(BaseModel):
    index: int
    start: str
    length_days: int


class SeriesOut(BaseModel):
    entity_id: str
    scalar: bool
    dim: int
    windows: list[WindowOut]
    values: list[list[float] | None]


class PairRowOut(BaseModel):
    source: str
    target: str
    lag: int
    r: float | None
    n: int
    source_axis: int | None = None
    target_axis: int | None = None


class PairDrilldownOut(BaseModel):
    a: str
    b: str
    rows: list[PairRowOut]
    best: InfluenceEdgeOut | None


class PostOut(BaseModel):
    post_id: str
    timestamp: str
    excerpt: str
    engagement: int


class EntityDetailOut(BaseModel):
    entity_id: str
    kind: str
    label: str
    posts: list[PostOut]
