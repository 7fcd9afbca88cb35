"""Stage orchestration: ingest, graph, clean, embed, entities, discover.

Stages exchange serialized artifacts only, so cached and freshly computed
results are byte-interchangeable, and every stage output is a pure function
of (inputs, configuration, seed). Each invocation ends by committing a run
snapshot to the store.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .cleaning import apply_cleaning, score_links, scores_to_bytes
from .config import ConfigError, PipelineConfig
from .discovery import discover, influence_to_bytes, influence_to_dot
from .embedding import build_embedding_series, series_table_from_bytes, series_table_to_bytes
from .entities import (
    EntityKind,
    build_entities,
    detect_communities,
    entities_to_bytes,
    entity_series,
    series_set_to_bytes,
    series_set_from_bytes,
)
from .graph import (
    REFERENCE_KINDS,
    EdgeKind,
    assertion_node,
    build_graph,
    graph_from_bytes,
    graph_to_bytes,
    make_windows,
    user_projection,
)
from .ingest import EventRecord, Post, Reject, parse_events, parse_posts
from .store import RunManifest, RunStore, StageCache, digest_of_mapping, sha256_hex

STAGES = ("ingest", "graph", "clean", "embed", "entities", "discover")

EXCERPT_LIMIT = 280


class PipelineError(RuntimeError):
    pass


class MissingUpstream(PipelineError):
    def __init__(self, stage: str):
        super().__init__(f"missing upstream artifact; run the {stage!r} stage first")
        self.stage = stage


@dataclass
class StageResult:
    name: str
    cached: bool
    summary: str
    artifacts: dict[str, bytes] = field(default_factory=dict)


@dataclass
class RunOutcome:
    results: list[StageResult]
    manifest: RunManifest


# artifact codecs


def posts_to_bytes(posts: list[Post], rejects: list[Reject]) -> bytes:
    rows = [
        {
            "id": p.post_id,
            "author_id": p.author_id,
            "timestamp": p.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "text": p.text,
            "repost_of": p.repost_of,
            "reply_to": p.reply_to,
            "quote_of": p.quote_of,
            "urls": list(p.urls),
        }
        for p in posts
    ]
    reject_rows = [
        {"line_no": r.line_no, "field": r.field, "reason": r.reason} for r in rejects
    ]
    payload = {"posts": rows, "rejects": reject_rows}
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()


def posts_from_bytes(blob: bytes) -> list[Post]:
    from .ingest import parse_timestamp

    payload = json.loads(blob.decode("utf-8"))
    return [
        Post(
            post_id=row["id"],
            author_id=row["author_id"],
            timestamp=parse_timestamp(row["timestamp"]),
            text=row["text"],
            repost_of=row.get("repost_of"),
            reply_to=row.get("reply_to"),
            quote_of=row.get("quote_of"),
            urls=tuple(row.get("urls") or ()),
        )
        for row in payload["posts"]
    ]


def events_to_bytes(events: list[EventRecord]) -> bytes:
    rows = [
        {"date": e.date.isoformat(), "event_type": e.event_type, "count": e.count}
        for e in events
    ]
    return (json.dumps({"events": rows}, sort_keys=True, separators=(",", ":")) + "\n").encode()


def events_from_bytes(blob: bytes) -> list[EventRecord]:
    payload = json.loads(blob.decode("utf-8"))
    return [
        EventRecord(date=date.fromisoformat(row["date"]), event_type=row["event_type"], count=row["count"])
        for row in payload["events"]
    ]


def build_posts_index(posts: list[Post], graph_blob: bytes) -> bytes:
    """Per-post metadata for the detail panel: excerpt, engagement, hosts."""
    graph = graph_from_bytes(graph_blob)
    engagement: dict[str, int] = {}
    hosts: dict[str, set[str]] = {}
    for edge in graph.edges:
        if edge.kind in REFERENCE_KINDS:
            engagement[edge.assertion.key] = engagement.get(edge.assertion.key, 0) + 1
    url_hosts = {
        node.key: info.host
        for node, info in graph.assertion_info.items()
        if info.host is not None
    }
    for post in posts:
        cited = {url_hosts[u] for u in post.urls if u in url_hosts}
        if cited:
            hosts[post.post_id] = cited
    rows = [
        {
            "post_id": p.post_id,
            "author_id": p.author_id,
            "timestamp": p.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "excerpt": p.text[:EXCERPT_LIMIT],
            "engagement": engagement.get(p.post_id, 0),
            "hosts": sorted(hosts.get(p.post_id, ())),
        }
        for p in sorted(posts, key=lambda p: p.post_id)
        if assertion_node(p.post_id) in graph.assertions
    ]
    return (json.dumps({"posts": rows}, sort_keys=True, separators=(",", ":")) + "\n").encode()


class Pipeline:
    def __init__(self, config: PipelineConfig, jobs: int = 1):
        self.config = config
        self.jobs = max(1, jobs)
        self.store = RunStore(config.store_dir)
        self.cache = StageCache(self.store.cache_dir)

    # stage keys

    def _input_digest(self, path_value: str | None) -> str | None:
        if path_value is None:
            return None
        path = Path(path_value)
        if not path.is_file():
            raise PipelineError(f"input file not found: {path}")
        return sha256_hex(path.read_bytes())

    def _date_range_dict(self) -> dict | None:
        if self.config.date_range is None:
            return None
        return {
            "start": self.config.date_range.start.isoformat(),
            "end": self.config.date_range.end.isoformat(),
        }

    def _stage_key(self, stage: str, deps: dict) -> str:
        return digest_of_mapping({"stage": stage, "deps": deps})

    # stage computations; each returns (artifacts, summary)

    def _compute_ingest(self) -> tuple[dict[str, bytes], str]:
        posts_path = self.config.inputs.posts
        if posts_path is None:
            raise ConfigError("inputs.posts is required to run the ingest stage")
        with open(posts_path, "r", encoding="utf-8") as fh:
            posts, rejects = parse_posts(fh)
        events: list[EventRecord] = []
        if self.config.inputs.events is not None:
            allowed = set(self.config.inputs.event_types)
            if allowed:
                with open(self.config.inputs.events, "r", encoding="utf-8", newline="") as fh:
                    events = parse_events(fh, allowed)
        artifacts = {
            "posts.json": posts_to_bytes(posts, rejects),
            "events.json": events_to_bytes(events),
        }
        summary = f"{len(posts)} posts, {len(rejects)} rejects, {len(events)} event rows"
        return artifacts, summary

    def _compute_graph(self, upstream: dict[str, bytes]) -> tuple[dict[str, bytes], str]:
        posts = posts_from_bytes(upstream["posts.json"])
        if self.config.date_range is not None:
            start, end = self.config.date_range.start, self.config.date_range.end
            posts = [p for p in posts if start <= p.timestamp.date() <= end]
        graph = build_graph(posts)
        blob = graph_to_bytes(graph)
        summary = (
            f"{len(graph.users)} users, {len(graph.assertions)} assertions, "
            f"{len(graph.edges)} edges"
        )
        return {"graph_raw.json": blob}, summary

    def _compute_clean(self, upstream: dict[str, bytes]) -> tuple[dict[str, bytes], str]:
        graph = graph_from_bytes(upstream["graph_raw.json"])
        cleaning = self.config.cleaning
        scores = score_links(graph, cleaning.candidate_budget)
        cleaned = apply_cleaning(graph, scores, cleaning.add_threshold, cleaning.remove_threshold)
        imputed = sum(1 for e in cleaned.edges if e.kind is EdgeKind.IMPUTED)
        removed = len(graph.edges) - (len(cleaned.edges) - imputed)
        artifacts = {"graph.json": graph_to_bytes(cleaned)}
        if cleaning.dump_scores:
            artifacts["scores.json"] = scores_to_bytes(scores)
        summary = f"{imputed} edges imputed, {removed} removed, {len(cleaned.edges)} kept"
        return artifacts, summary

    def _windows(self):
        if self.config.date_range is None:
            raise ConfigError("date_range is required to build windows")
        window = self.config.window
        windows = make_windows(
            self.config.date_range.start,
            self.config.date_range.end,
            window.length_days,
            window.shift_days,
        )
        if not windows:
            raise PipelineError(
                "date_range is shorter than one window; nothing to embed"
            )
        return windows

    def _compute_embed(self, upstream: dict[str, bytes]) -> tuple[dict[str, bytes], str]:
        graph = graph_from_bytes(upstream["graph.json"])
        windows = self._windows()
        series, reports = build_embedding_series(graph, windows, self.config.embed_config())
        trained = sum(len(t) for t in series.tables)
        last_loss = next(
            (r.final_loss for r in reversed(reports) if r.epochs_run > 0), float("nan")
        )
        blob = series_table_to_bytes(series)
        summary = (
            f"{len(windows)} windows, {trained} node embeddings, last window loss {last_loss:.4f}"
        )
        return {"embeddings.json": blob}, summary

    def _compute_entities(self, upstream: dict[str, bytes]) -> tuple[dict[str, bytes], str]:
        graph = graph_from_bytes(upstream["graph.json"])
        series = series_table_from_bytes(upstream["embeddings.json"])
        events = events_from_bytes(upstream["events.json"])
        posts = posts_from_bytes(upstream["posts.json"])

        projection = user_projection(graph)
        if projection.users:
            partition = detect_communities(
                projection,
                seed=self.config.seed,
                max_iters=self.config.entities.community_max_iters,
            )
        else:
            from .entities import Partition

            partition = Partition()
        entity_cfg = self.config.entity_config()
        entity_list = build_entities(graph, partition, entity_cfg)
        windows = series.windows if series.windows else self._windows()
        all_series = [
            entity_series(entity, series, events, windows) for entity in entity_list
        ]
        artifacts = {
            "entities.json": entities_to_bytes(entity_list, partition),
            "entity_series.json": series_set_to_bytes(all_series),
            "posts_index.json": build_posts_index(posts, upstream["graph.json"]),
        }
        kind_counts: dict[str, int] = {}
        for entity in entity_list:
            kind_counts[entity.kind.value] = kind_counts.get(entity.kind.value, 0) + 1
        summary = ", ".join(f"{v} {k}" for k, v in sorted(kind_counts.items())) or "no entities"
        return artifacts, summary

    def _compute_discover(self, upstream: dict[str, bytes]) -> tuple[dict[str, bytes], str]:
        entities_payload = json.loads(upstream["entities.json"].decode("utf-8"))
        kinds = {
            row["entity_id"]: EntityKind(row["kind"])
            for row in entities_payload["entities"]
        }
        labels = {row["entity_id"]: row["label"] for row in entities_payload["entities"]}
        series = series_set_from_bytes(upstream["entity_series.json"], kinds)
        if len(series) < 2:
            raise PipelineError("fewer than 2 entities; nothing to correlate")
        graph = discover(series, self.config.discovery_config(), jobs=self.jobs)
        artifacts = {
            "influence.json": influence_to_bytes(graph),
            "influence.dot": influence_to_dot(graph, labels).encode("utf-8"),
        }
        summary = f"{len(graph.edges)} influence edges over {len(graph.pair_stats)} pairs"
        return artifacts, summary

    # orchestration

    def run(self, target: str) -> RunOutcome:
        """Run stages through target, reusing cached artifacts when digests match."""
        if target == "all":
            chain = list(STAGES)
            compute_all = True
        elif target in STAGES:
            chain = list(STAGES[: STAGES.index(target) + 1])
            compute_all = False
        else:
            raise ConfigError(f"unknown stage {target!r}")

        results: list[StageResult] = []
        artifacts: dict[str, bytes] = {}

        for stage in chain:
            key = self._key_for(stage, artifacts)
            cached = self.cache.get(stage, key)
            is_target = stage == chain[-1]
            if cached is not None:
                stage_artifacts, summary, was_cached = cached, "reused from cache", True
            elif compute_all or is_target:
                stage_artifacts, summary = self._compute_stage(stage, artifacts)
                self.cache.put(stage, key, stage_artifacts)
                was_cached = False
            else:
                raise MissingUpstream(stage)
            artifacts.update(stage_artifacts)
            results.append(
                StageResult(name=stage, cached=was_cached, summary=summary, artifacts=stage_artifacts)
            )

        absent = [s for s in STAGES if s not in chain]
        manifest = self.store.save_run(
            artifacts,
            parameters=self.config.canonical_dict(),
            config_digest=sha256_hex(self.config.canonical_json().encode()),
            absent=absent,
        )
        return RunOutcome(results=results, manifest=manifest)

    def _compute_stage(self, stage: str, artifacts: dict[str, bytes]):
        if stage == "ingest":
            return self._compute_ingest()
        if stage == "graph":
            return self._compute_graph(artifacts)
        if stage == "clean":
            return self._compute_clean(artifacts)
        if stage == "embed":
            return self._compute_embed(artifacts)
        if stage == "entities":
            return self._compute_entities(artifacts)
        if stage == "discover":
            return self._compute_discover(artifacts)
        raise ConfigError(f"unknown stage {stage!r}")

    def _key_for(self, stage: str, artifacts: dict[str, bytes]) -> str:
        cfg = self.config

        def artifact_digest(name: str) -> str:
            if name not in artifacts:
                raise MissingUpstream(_producer_of(name))
            return sha256_hex(artifacts[name])

        if stage == "ingest":
            deps = {
                "posts": self._input_digest(cfg.inputs.posts),
                "events": self._input_digest(cfg.inputs.events),
                "event_types": sorted(cfg.inputs.event_types),
            }
        elif stage == "graph":
            deps = {
                "posts.json": artifact_digest("posts.json"),
                "date_range": self._date_range_dict(),
            }
        elif stage == "clean":
            deps = {
                "graph_raw.json": artifact_digest("graph_raw.json"),
                "cleaning": cfg.cleaning.model_dump(mode="json"),
            }
        elif stage == "embed":
            deps = {
                "graph.json": artifact_digest("graph.json"),
                "window": cfg.window.model_dump(mode="json"),
                "embedding": cfg.embedding.model_dump(mode="json"),
                "seed": cfg.seed,
                "date_range": self._date_range_dict(),
            }
        elif stage == "entities":
            deps = {
                "graph.json": artifact_digest("graph.json"),
                "embeddings.json": artifact_digest("embeddings.json"),
                "events.json": artifact_digest("events.json"),
                "posts.json": artifact_digest("posts.json"),
                "entities": cfg.entities.model_dump(mode="json"),
                "event_types": sorted(cfg.inputs.event_types),
                "seed": cfg.seed,
            }
        elif stage == "discover":
            deps = {
                "entity_series.json": artifact_digest("entity_series.json"),
                "entities.json": artifact_digest("entities.json"),
                "discovery": cfg.discovery.model_dump(mode="json"),
                "lag_windows": cfg.window.lag_windows,
            }
        else:
            raise ConfigError(f"unknown stage {stage!r}")
        return self._stage_key(stage, deps)


def _producer_of(artifact_name: str) -> str:
    producers = {
        "posts.json": "ingest",
        "events.json": "ingest",
        "graph_raw.json": "graph",
        "graph.json": "clean",
        "scores.json": "clean",
        "embeddings.json": "embed",
        "entities.json": "entities",
        "entity_series.json": "entities",
        "posts_index.json": "entities",
        "influence.json": "discover",
        "influence.dot": "discover",
    }
    return producers.get(artifact_name, artifact_name)
