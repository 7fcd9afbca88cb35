"""Read-only HTTP API over stored runs, plus static hosting of the console.

Runs are immutable once committed, so loaded runs are cached per process
and every response for a fixed run and query is stable across calls.
Threshold and entity filters re-filter stored per-pair statistics; nothing
is ever recomputed or written through this API.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dataclass_field
from datetime import date
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..discovery import (
    DiscoveryConfig,
    InfluenceGraph,
    edges_at_threshold,
    influence_from_bytes,
    pair_table,
)
from ..entities import EntityKind, EntityTimeSeries, series_set_from_bytes
from ..graph import TimeWindow, make_windows
from ..store import ArtifactNotFound, RunNotFound, RunStore
from . import schemas

STORE_DIR_ENV = "INFLUENCE_STORE_DIR"
UI_DIR_ENV = "INFLUENCE_UI_DIR"


@dataclass
class LoadedRun:
    store: RunStore
    run_id: str
    _cache: dict = dataclass_field(default_factory=dict)

    def _artifact(self, name: str) -> bytes:
        try:
            return self.store.read_artifact(self.run_id, name)
        except ArtifactNotFound:
            raise HTTPException(
                status_code=404,
                detail=f"run {self.run_id} has no {name} artifact; run the producing stage",
            )

    @property
    def manifest(self):
        if "manifest" not in self._cache:
            self._cache["manifest"] = self.store.load_manifest(self.run_id)
        return self._cache["manifest"]

    @property
    def entities(self) -> list[dict]:
        if "entities" not in self._cache:
            payload = json.loads(self._artifact("entities.json").decode("utf-8"))
            self._cache["entities"] = payload["entities"]
        return self._cache["entities"]

    def entity(self, entity_id: str) -> dict:
        for row in self.entities:
            if row["entity_id"] == entity_id:
                return row
        raise HTTPException(status_code=404, detail=f"unknown entity {entity_id!r}")

    @property
    def influence(self) -> InfluenceGraph:
        if "influence" not in self._cache:
            self._cache["influence"] = influence_from_bytes(self._artifact("influence.json"))
        return self._cache["influence"]

    @property
    def series_by_id(self) -> dict[str, EntityTimeSeries]:
        if "series" not in self._cache:
            kinds = {row["entity_id"]: EntityKind(row["kind"]) for row in self.entities}
            series = series_set_from_bytes(self._artifact("entity_series.json"), kinds)
            self._cache["series"] = {s.entity_id: s for s in series}
        return self._cache["series"]

    @property
    def windows(self) -> list[TimeWindow]:
        if "windows" not in self._cache:
            params = self.manifest.parameters
            rng = params.get("date_range")
            window = params.get("window", {})
            if not rng:
                self._cache["windows"] = []
            else:
                self._cache["windows"] = make_windows(
                    date.fromisoformat(rng["start"]),
                    date.fromisoformat(rng["end"]),
                    window.get("length_days", 20),
                    window.get("shift_days", 1),
                )
        return self._cache["windows"]

    @property
    def posts_index(self) -> list[dict]:
        if "posts" not in self._cache:
            payload = json.loads(self._artifact("posts_index.json").decode("utf-8"))
            self._cache["posts"] = payload["posts"]
        return self._cache["posts"]

    def discovery_defaults(self) -> DiscoveryConfig:
        return self.influence.config


class RunRepository:
    def __init__(self, store: RunStore):
        self.store = store
        self._runs: dict[str, LoadedRun] = {}

    def get(self, run_id: str) -> LoadedRun:
        if run_id not in self._runs:
            try:
                self.store.load_manifest(run_id)
            except RunNotFound:
                raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
            self._runs[run_id] = LoadedRun(self.store, run_id)
        return self._runs[run_id]


def _windows_out(windows: list[TimeWindow]) -> list[schemas.WindowOut]:
    return [
        schemas.WindowOut(index=w.index, start=w.start.isoformat(), length_days=w.length_days)
        for w in windows
    ]


def _edge_out(edge) -> schemas.InfluenceEdgeOut:
    return schemas.InfluenceEdgeOut(
        source=edge.source,
        target=edge.target,
        lag=edge.lag,
        r=edge.r,
        source_axis=edge.source_axis,
        target_axis=edge.target_axis,
    )


def create_app(store_dir: str | Path | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    store_root = Path(store_dir or os.environ.get(STORE_DIR_ENV, "./influence-store"))
    store = RunStore(store_root)
    repo = RunRepository(store)
    app = FastAPI(title="influence-tomograph", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def bad_query(request: Request, exc: RequestValidationError):
        fields = ", ".join(
            ".".join(str(loc) for loc in err["loc"][1:]) or str(err["loc"][0])
            for err in exc.errors()
        )
        return JSONResponse(
            status_code=400,
            content={"detail": f"malformed query parameter(s): {fields}"},
        )

    @app.get("/api/v1/runs", response_model=list[schemas.RunSummary])
    def list_runs():
        return [
            schemas.RunSummary(
                run_id=m.run_id,
                created_at=m.created_at,
                config_digest=m.config_digest,
                parameters=m.parameters,
                stage_checksums=m.stage_checksums,
                absent=m.absent,
            )
            for m in store.list_runs()
        ]

    @app.get("/api/v1/runs/{run_id}/entities", response_model=list[schemas.EntityOut])
    def entity_list(run_id: str):
        run = repo.get(run_id)
        return [
            schemas.EntityOut(
                id=row["entity_id"],
                kind=row["kind"],
                label=row["label"],
                size=row["member_count"],
            )
            for row in run.entities
        ]

    @app.get(
        "/api/v1/runs/{run_id}/influence-graph",
        response_model=schemas.InfluenceGraphOut,
    )
    def influence_graph(
        run_id: str,
        min_corr: float | None = Query(default=None),
        use_absolute: bool | None = Query(default=None),
        entities: str | None = Query(default=None),
    ):
        run = repo.get(run_id)
        defaults = run.discovery_defaults()
        threshold = defaults.min_correlation if min_corr is None else min_corr
        absolute = defaults.use_absolute if use_absolute is None else use_absolute

        known = {row["entity_id"] for row in run.entities}
        if entities is not None:
            selected = [e for e in entities.split(",") if e]
            unknown = [e for e in selected if e not in known]
            if unknown:
                raise HTTPException(
                    status_code=404, detail=f"unknown entities in filter: {', '.join(unknown)}"
                )
            visible = set(selected)
        else:
            visible = known

        edges = [
            e
            for e in edges_at_threshold(run.influence, threshold, absolute)
            if e.source in visible and e.target in visible
        ]
        nodes = [
            schemas.GraphNodeOut(id=row["entity_id"], kind=row["kind"], label=row["label"])
            for row in run.entities
            if row["entity_id"] in visible
        ]
        return schemas.InfluenceGraphOut(
            nodes=nodes,
            edges=[_edge_out(e) for e in edges],
            min_corr=threshold,
            use_absolute=absolute,
        )

    @app.get("/api/v1/runs/{run_id}/heatmap", response_model=schemas.HeatmapOut)
    def heatmap(run_id: str):
        run = repo.get(run_id)
        graph = run.influence
        ids = graph.entity_ids
        index = {eid: i for i, eid in enumerate(ids)}
        size = len(ids)
        r: list[list[float | None]] = [[None] * size for _ in range(size)]
        lag: list[list[int | None]] = [[None] * size for _ in range(size)]
        lead: list[list[str | None]] = [[None] * size for _ in range(size)]
        for i in range(size):
            r[i][i] = 1.0
            lag[i][i] = 0
        for (a, b), stats in graph.pair_stats.items():
            i, j = index[a], index[b]
            for row, col in ((i, j), (j, i)):
                r[row][col] = stats.heat_r
                lag[row][col] = stats.heat_lag
                lead[row][col] = stats.heat_lead
        return schemas.HeatmapOut(entities=ids, r=r, lag=lag, lead=lead)

    @app.get(
        "/api/v1/runs/{run_id}/entities/{entity_id}/series",
        response_model=schemas.SeriesOut,
    )
    def entity_series_endpoint(run_id: str, entity_id: str):
        run = repo.get(run_id)
        run.entity(entity_id)
        series = run.series_by_id.get(entity_id)
        if series is None:
            raise HTTPException(status_code=404, detail=f"no series stored for {entity_id!r}")
        values = [
            None if v is None else [float(c) for c in v]
            for v in series.values
        ]
        return schemas.SeriesOut(
            entity_id=entity_id,
            scalar=series.scalar,
            dim=series.dim,
            windows=_windows_out(run.windows),
            values=values,
        )

    @app.get(
        "/api/v1/runs/{run_id}/pairs/{a}/{b}",
        response_model=schemas.PairDrilldownOut,
    )
    def pair_drilldown(run_id: str, a: str, b: str):
        run = repo.get(run_id)
        run.entity(a)
        run.entity(b)
        series_a = run.series_by_id.get(a)
        series_b = run.series_by_id.get(b)
        if series_a is None or series_b is None:
            raise HTTPException(status_code=404, detail="series missing for pair")
        cfg = run.discovery_defaults()
        rows = [schemas.PairRowOut(**row) for row in pair_table(series_a, series_b, cfg)]
        key = (a, b) if (a, b) in run.influence.pair_stats else (b, a)
        stats = run.influence.pair_stats.get(key)
        best = stats.best if stats else None
        return schemas.PairDrilldownOut(
            a=a, b=b, rows=rows, best=_edge_out(best) if best else None
        )

    @app.get(
        "/api/v1/runs/{run_id}/entities/{entity_id}/posts",
        response_model=schemas.EntityDetailOut,
    )
    def entity_posts(
        run_id: str,
        entity_id: str,
        from_window: int | None = Query(default=None, alias="from", ge=0),
        to_window: int | None = Query(default=None, alias="to", ge=0),
        limit: int = Query(default=20, ge=1),
    ):
        run = repo.get(run_id)
        entity = run.entity(entity_id)
        if (
            from_window is not None
            and to_window is not None
            and from_window > to_window
        ):
            raise HTTPException(
                status_code=400, detail="malformed query parameter(s): from exceeds to"
            )
        windows = run.windows
        date_floor = date_ceiling = None
        if windows:
            lo = windows[from_window] if from_window is not None and from_window < len(windows) else None
            hi = windows[to_window] if to_window is not None and to_window < len(windows) else None
            if from_window is not None:
                date_floor = lo.start if lo else windows[-1].end
            if to_window is not None:
                date_ceiling = hi.end if hi else windows[-1].end

        kind = EntityKind(entity["kind"])
        members = set(entity.get("members") or [])
        member_keys = {m.split(":", 1)[1] for m in members}

        def belongs(row: dict) -> bool:
            if kind is EntityKind.PHYSICAL:
                return False
            if kind is EntityKind.DOMAIN:
                return entity["label"] in row.get("hosts", [])
            return row["author_id"] in member_keys

        selected = []
        for row in run.posts_index:
            if not belongs(row):
                continue
            day = date.fromisoformat(row["timestamp"][:10])
            if date_floor is not None and day < date_floor:
                continue
            if date_ceiling is not None and day >= date_ceiling:
                continue
            selected.append(row)
        selected.sort(key=lambda r: (-r["engagement"], r["post_id"]))
        return schemas.EntityDetailOut(
            entity_id=entity_id,
            kind=entity["kind"],
            label=entity["label"],
            posts=[
                schemas.PostOut(
                    post_id=row["post_id"],
                    timestamp=row["timestamp"],
                    excerpt=row["excerpt"][:280],
                    engagement=row["engagement"],
                )
                for row in selected[:limit]
            ],
        )

    ui_root = Path(ui_dir) if ui_dir else Path(os.environ.get(UI_DIR_ENV, "frontend/dist"))
    ui_root = ui_root.resolve()
    if ui_root.is_dir():
        app.mount("/", StaticFiles(directory=ui_root, html=True), name="console")

    return app
