"""Entities under influence analysis and their per-window time-series.

Four kinds exist: physical event types (scalar count series), individual
influencers, user communities, and information domains (all vector ideology
series derived from the embedding tables).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .embedding import EmbeddingSeriesTable
from .graph import (
    BipartiteInteractionGraph,
    EdgeKind,
    NodeId,
    TimeWindow,
    UserGraph,
)
from .ingest import EventRecord


class EntityKind(str, Enum):
    PHYSICAL = "physical"
    INFLUENCER = "influencer"
    COMMUNITY = "community"
    DOMAIN = "domain"


@dataclass(frozen=True, slots=True)
class EntityConfig:
    influencer_count: int = 20
    domain_count: int = 20
    min_community_size: int = 3
    community_max_iters: int = 50
    event_types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.influencer_count < 0 or self.domain_count < 0:
            raise ValueError("entity counts must be >= 0")
        if self.min_community_size < 1:
            raise ValueError("min_community_size must be >= 1")
        if self.community_max_iters < 1:
            raise ValueError("community_max_iters must be >= 1")


@dataclass(frozen=True, slots=True)
class Entity:
    entity_id: str
    kind: EntityKind
    label: str
    members: tuple[NodeId, ...] = ()
    event_type: str | None = None


@dataclass
class EntityTimeSeries:
    entity_id: str
    scalar: bool
    values: list[np.ndarray | None] = field(default_factory=list)

    @property
    def dim(self) -> int:
        for value in self.values:
            if value is not None:
                return int(value.shape[0])
        return 1 if self.scalar else 0


@dataclass
class Partition:
    labels: dict[NodeId, int] = field(default_factory=dict)
    unclustered_label: int | None = None

    def communities(self) -> dict[int, list[NodeId]]:
        groups: dict[int, list[NodeId]] = {}
        for node, label in self.labels.items():
            groups.setdefault(label, []).append(node)
        for members in groups.values():
            members.sort(key=lambda n: n.key)
        return groups


def detect_communities(user_graph: UserGraph, seed: int, max_iters: int) -> Partition:
    """Synchronous weighted label propagation over the user graph.

    Every node starts with its own label and repeatedly adopts the label
    carrying the largest total incident edge weight among its neighbors
    (ties to the smallest label), until a fixpoint or max_iters. Resulting
    communities smaller than three users are pooled into one unclustered
    catch-all. The outcome is deterministic; seed is accepted for interface
    stability with stochastic drop-in algorithms.
    """
    if not user_graph.users:
        raise ValueError("user graph has no nodes")
    del seed  # synchronous updates need no randomness
    nodes = sorted(user_graph.users, key=lambda n: n.key)
    labels = {node: i for i, node in enumerate(nodes)}
    adjacency = user_graph.neighbors()

    for _ in range(max_iters):
        updated: dict[NodeId, int] = {}
        changed = False
        for node in nodes:
            neighbor_weights: dict[int, int] = {}
            for neighbor, weight in adjacency.get(node, {}).items():
                label = labels[neighbor]
                neighbor_weights[label] = neighbor_weights.get(label, 0) + weight
            if neighbor_weights:
                best = min(
                    neighbor_weights, key=lambda lbl: (-neighbor_weights[lbl], lbl)
                )
            else:
                best = labels[node]
            updated[node] = best
            changed = changed or best != labels[node]
        labels = updated
        if not changed:
            break

    groups: dict[int, list[NodeId]] = {}
    for node in nodes:
        groups.setdefault(labels[node], []).append(node)

    kept = sorted(
        (members for members in groups.values() if len(members) >= 3),
        key=lambda members: min(m.key for m in members),
    )
    leftovers = sorted(
        (node for members in groups.values() if len(members) < 3 for node in members),
        key=lambda n: n.key,
    )

    partition = Partition()
    for label, members in enumerate(kept):
        for node in members:
            partition.labels[node] = label
    if leftovers:
        catchall = len(kept)
        partition.unclustered_label = catchall
        for node in leftovers:
            partition.labels[node] = catchall
    return partition


def build_entities(
    graph: BipartiteInteractionGraph,
    partition: Partition,
    cfg: EntityConfig,
) -> list[Entity]:
    """Materialize influencer, domain, community and physical entities.

    Influencers are the top users by interaction degree and leave their
    communities; domains rank registrable hosts by citation count; the
    unclustered catch-all never becomes a community entity.
    """
    degrees = graph.degrees()
    entities: list[Entity] = []

    ranked_users = sorted(graph.users, key=lambda n: (-degrees.get(n, 0), n.key))
    influencers = ranked_users[: cfg.influencer_count]
    influencer_set = set(influencers)
    for node in influencers:
        entities.append(
            Entity(
                entity_id=f"influencer:{node.key}",
                kind=EntityKind.INFLUENCER,
                label=node.key,
                members=(node,),
            )
        )

    host_citations: dict[str, int] = {}
    host_nodes: dict[str, set[NodeId]] = {}
    for edge in graph.edges:
        if edge.kind is not EdgeKind.CITE_URL:
            continue
        info = graph.assertion_info.get(edge.assertion)
        if info is None or info.host is None:
            continue
        host_citations[info.host] = host_citations.get(info.host, 0) + 1
        host_nodes.setdefault(info.host, set()).add(edge.assertion)
    ranked_hosts = sorted(host_citations, key=lambda h: (-host_citations[h], h))
    for host in ranked_hosts[: cfg.domain_count]:
        entities.append(
            Entity(
                entity_id=f"domain:{host}",
                kind=EntityKind.DOMAIN,
                label=host,
                members=tuple(sorted(host_nodes[host], key=lambda n: n.key)),
            )
        )

    for label, members in sorted(partition.communities().items()):
        if label == partition.unclustered_label:
            continue
        remaining = tuple(n for n in members if n not in influencer_set)
        if len(remaining) < cfg.min_community_size:
            continue
        entities.append(
            Entity(
                entity_id=f"community:{label}",
                kind=EntityKind.COMMUNITY,
                label=f"community {label} ({len(remaining)} users)",
                members=remaining,
            )
        )

    for event_type in cfg.event_types:
        entities.append(
            Entity(
                entity_id=f"event:{event_type}",
                kind=EntityKind.PHYSICAL,
                label=event_type,
                event_type=event_type,
            )
        )
    return entities


def entity_series(
    entity: Entity,
    series_table: EmbeddingSeriesTable,
    events: list[EventRecord],
    windows: list[TimeWindow],
) -> EntityTimeSeries:
    """One value per window: event-count sum or mean member embedding."""
    if entity.kind is EntityKind.PHYSICAL:
        values: list[np.ndarray | None] = []
        for window in windows:
            total = sum(
                rec.count for rec in events
                if rec.event_type == entity.event_type
                and window.start <= rec.date < window.end
            )
            values.append(np.array([float(total)]))
        return EntityTimeSeries(entity_id=entity.entity_id, scalar=True, values=values)

    table_by_index = {w.index: t for w, t in zip(series_table.windows, series_table.tables)}
    values = []
    for window in windows:
        table = table_by_index.get(window.index)
        if table is None:
            values.append(None)
            continue
        member_vectors = [
            vec for node in entity.members if (vec := table.get(node)) is not None
        ]
        values.append(np.mean(member_vectors, axis=0) if member_vectors else None)
    return EntityTimeSeries(entity_id=entity.entity_id, scalar=False, values=values)


# serialization helpers


def entities_to_bytes(entities: list[Entity], partition: Partition) -> bytes:
    rows = [
        {
            "entity_id": e.entity_id,
            "kind": e.kind.value,
            "label": e.label,
            "member_count": len(e.members),
            "members": [str(m) for m in e.members],
            "event_type": e.event_type,
        }
        for e in sorted(entities, key=lambda e: e.entity_id)
    ]
    payload = {
        "entities": rows,
        "partition": {
            "labels": {node.key: label for node, label in sorted(
                partition.labels.items(), key=lambda kv: kv[0].key
            )},
            "unclustered_label": partition.unclustered_label,
        },
    }
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()


def series_set_to_bytes(series: list[EntityTimeSeries]) -> bytes:
    rows = []
    for s in sorted(series, key=lambda s: s.entity_id):
        for window_index, value in enumerate(s.values):
            rows.append(
                {
                    "entity_id": s.entity_id,
                    "window": window_index,
                    "values": None
                    if value is None
                    else [float(f"{v:.9g}") for v in np.atleast_1d(value)],
                }
            )
    return (json.dumps({"series": rows}, sort_keys=True, separators=(",", ":")) + "\n").encode()


def series_set_from_bytes(blob: bytes, entity_kinds: dict[str, EntityKind]) -> list[EntityTimeSeries]:
    payload = json.loads(blob.decode("utf-8"))
    grouped: dict[str, list[tuple[int, list[float] | None]]] = {}
    for row in payload["series"]:
        grouped.setdefault(row["entity_id"], []).append((row["window"], row["values"]))
    out = []
    for entity_id, pairs in sorted(grouped.items()):
        pairs.sort()
        scalar = entity_kinds.get(entity_id) is EntityKind.PHYSICAL
        values = [
            None if vals is None else np.asarray(vals, dtype=np.float64)
            for _, vals in pairs
        ]
        out.append(EntityTimeSeries(entity_id=entity_id, scalar=scalar, values=values))
    return out
