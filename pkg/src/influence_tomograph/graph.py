"""Bipartite user-assertion interaction graph and its user-user projection.

Assertions are posts and cited URLs. Reference edges (repost/reply/quote)
point from the acting user to the referenced assertion; a stub assertion is
created when the referenced post is missing from the batch, so interaction
chains survive partial collection.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Iterable

from .ingest import Post, extract_urls, parse_timestamp


class NodeKind(str, Enum):
    USER = "user"
    ASSERTION = "assertion"


class EdgeKind(str, Enum):
    POST = "post"
    REPOST = "repost"
    REPLY = "reply"
    QUOTE = "quote"
    CITE_URL = "cite_url"
    IMPUTED = "imputed"


REFERENCE_KINDS = {EdgeKind.REPOST, EdgeKind.REPLY, EdgeKind.QUOTE}


@dataclass(frozen=True, slots=True)
class NodeId:
    kind: NodeKind
    key: str

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.key}"


def user_node(key: str) -> NodeId:
    return NodeId(NodeKind.USER, key)


def assertion_node(key: str) -> NodeId:
    return NodeId(NodeKind.ASSERTION, key)


@dataclass(frozen=True, slots=True)
class AssertionInfo:
    """Metadata carried by an assertion node."""

    author_id: str | None = None
    host: str | None = None  # set only for URL assertions
    stub: bool = False


@dataclass(frozen=True, slots=True)
class Edge:
    user: NodeId
    assertion: NodeId
    kind: EdgeKind
    timestamp: datetime


@dataclass(frozen=True, slots=True)
class TimeWindow:
    start: date
    length_days: int
    index: int

    def __post_init__(self) -> None:
        if self.length_days < 1:
            raise ValueError("length_days must be >= 1")

    @property
    def end(self) -> date:
        """Exclusive end date."""
        return self.start + timedelta(days=self.length_days)

    def contains(self, ts: datetime) -> bool:
        return self.start <= ts.date() < self.end


@dataclass
class BipartiteInteractionGraph:
    users: set[NodeId] = field(default_factory=set)
    assertions: set[NodeId] = field(default_factory=set)
    edges: list[Edge] = field(default_factory=list)
    assertion_info: dict[NodeId, AssertionInfo] = field(default_factory=dict)

    def add_edge(self, edge: Edge) -> None:
        if edge.user.kind is not NodeKind.USER or edge.assertion.kind is not NodeKind.ASSERTION:
            raise ValueError("edges must join a user node to an assertion node")
        self.users.add(edge.user)
        self.assertions.add(edge.assertion)
        self.edges.append(edge)

    @property
    def nodes(self) -> set[NodeId]:
        return self.users | self.assertions

    def date_range(self) -> tuple[date, date] | None:
        """Inclusive (first, last) edge dates, or None for an edgeless graph."""
        if not self.edges:
            return None
        days = [e.timestamp.date() for e in self.edges]
        return min(days), max(days)

    def degrees(self) -> dict[NodeId, int]:
        deg: dict[NodeId, int] = {n: 0 for n in self.users | self.assertions}
        for e in self.edges:
            deg[e.user] += 1
            deg[e.assertion] += 1
        return deg

    def neighbors(self) -> dict[NodeId, set[NodeId]]:
        """Adjacency over distinct endpoints (parallel edges collapse)."""
        adj: dict[NodeId, set[NodeId]] = {n: set() for n in self.users | self.assertions}
        for e in self.edges:
            adj[e.user].add(e.assertion)
            adj[e.assertion].add(e.user)
        return adj

    def edge_pairs(self) -> set[tuple[NodeId, NodeId]]:
        return {(e.user, e.assertion) for e in self.edges}


@dataclass
class UserGraph:
    users: set[NodeId] = field(default_factory=set)
    weights: dict[tuple[NodeId, NodeId], int] = field(default_factory=dict)

    def weight(self, a: NodeId, b: NodeId) -> int:
        key = (a, b) if a.key <= b.key else (b, a)
        return self.weights.get(key, 0)

    def add_interaction(self, a: NodeId, b: NodeId, count: int = 1) -> None:
        if a == b:
            return
        key = (a, b) if a.key <= b.key else (b, a)
        self.weights[key] = self.weights.get(key, 0) + count

    def neighbors(self) -> dict[NodeId, dict[NodeId, int]]:
        adj: dict[NodeId, dict[NodeId, int]] = {u: {} for u in self.users}
        for (a, b), w in self.weights.items():
            adj.setdefault(a, {})[b] = w
            adj.setdefault(b, {})[a] = w
        return adj


def build_graph(posts: Iterable[Post]) -> BipartiteInteractionGraph:
    """Assemble the bipartite interaction graph from a validated post batch."""
    graph = BipartiteInteractionGraph()
    posts = list(posts)

    authors: dict[str, str] = {p.post_id: p.author_id for p in posts}

    for post in posts:
        author = user_node(post.author_id)
        own = assertion_node(post.post_id)
        graph.assertion_info[own] = AssertionInfo(author_id=post.author_id)
        graph.add_edge(Edge(author, own, EdgeKind.POST, post.timestamp))

        for ref_id, kind in (
            (post.repost_of, EdgeKind.REPOST),
            (post.reply_to, EdgeKind.REPLY),
            (post.quote_of, EdgeKind.QUOTE),
        ):
            if ref_id is None:
                continue
            target = assertion_node(ref_id)
            if target not in graph.assertion_info:
                graph.assertion_info[target] = AssertionInfo(
                    author_id=authors.get(ref_id), stub=ref_id not in authors
                )
            graph.add_edge(Edge(author, target, kind, post.timestamp))

        for ref in extract_urls(post):
            target = assertion_node(ref.url)
            if target not in graph.assertion_info:
                graph.assertion_info[target] = AssertionInfo(host=ref.host)
            graph.add_edge(Edge(author, target, EdgeKind.CITE_URL, post.timestamp))

    return graph


def window_slice(graph: BipartiteInteractionGraph, window: TimeWindow) -> BipartiteInteractionGraph:
    """Subgraph of edges falling inside the window plus their endpoints."""
    sliced = BipartiteInteractionGraph()
    for edge in graph.edges:
        if window.contains(edge.timestamp):
            sliced.add_edge(edge)
    sliced.assertion_info = {
        node: graph.assertion_info[node]
        for node in sliced.assertions
        if node in graph.assertion_info
    }
    return sliced


def user_projection(graph: BipartiteInteractionGraph) -> UserGraph:
    """Weighted user-user graph counting repost/reply/quote interactions.

    An interaction edge from user u to an assertion authored by v adds one
    unit of weight to {u, v}. Self-interactions and assertions with an
    unknown author (stubs, URLs) contribute nothing.
    """
    projected = UserGraph(users=set(graph.users))
    for edge in graph.edges:
        if edge.kind not in REFERENCE_KINDS:
            continue
        info = graph.assertion_info.get(edge.assertion)
        if info is None or info.author_id is None:
            continue
        author = user_node(info.author_id)
        if author == edge.user:
            continue
        projected.users.add(author)
        projected.add_interaction(edge.user, author)
    return projected


def make_windows(start: date, end: date, length_days: int, shift_days: int) -> list[TimeWindow]:
    """All windows of the given length fully contained in [start, end]."""
    if length_days < 1 or shift_days < 1:
        raise ValueError("length_days and shift_days must be >= 1")
    windows: list[TimeWindow] = []
    index = 0
    cursor = start
    while cursor + timedelta(days=length_days - 1) <= end:
        windows.append(TimeWindow(start=cursor, length_days=length_days, index=index))
        cursor = cursor + timedelta(days=shift_days)
        index += 1
    return windows


# Snapshot serialization. Node and edge tables are sorted so identical graphs
# produce byte-identical files.

def graph_to_bytes(graph: BipartiteInteractionGraph) -> bytes:
    rng = graph.date_range()
    node_rows = []
    for node in sorted(graph.users | graph.assertions, key=lambda n: (n.kind.value, n.key)):
        info = graph.assertion_info.get(node)
        node_rows.append(
            {
                "kind": node.kind.value,
                "key": node.key,
                "author_id": info.author_id if info else None,
                "host": info.host if info else None,
                "stub": info.stub if info else False,
            }
        )
    edge_rows = sorted(
        (
            {
                "user": e.user.key,
                "assertion": e.assertion.key,
                "kind": e.kind.value,
                "timestamp": e.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            }
            for e in graph.edges
        ),
        key=lambda r: (r["timestamp"], r["user"], r["assertion"], r["kind"]),
    )
    payload = {
        "header": {
            "users": len(graph.users),
            "assertions": len(graph.assertions),
            "edges": len(graph.edges),
            "date_range": [rng[0].isoformat(), rng[1].isoformat()] if rng else None,
        },
        "nodes": node_rows,
        "edges": edge_rows,
    }
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def graph_from_bytes(blob: bytes) -> BipartiteInteractionGraph:
    payload = json.loads(blob.decode("utf-8"))
    graph = BipartiteInteractionGraph()
    for row in payload["nodes"]:
        node = NodeId(NodeKind(row["kind"]), row["key"])
        if node.kind is NodeKind.USER:
            graph.users.add(node)
        else:
            graph.assertions.add(node)
            graph.assertion_info[node] = AssertionInfo(
                author_id=row.get("author_id"), host=row.get("host"), stub=bool(row.get("stub"))
            )
    for row in payload["edges"]:
        graph.edges.append(
            Edge(
                user=user_node(row["user"]),
                assertion=assertion_node(row["assertion"]),
                kind=EdgeKind(row["kind"]),
                timestamp=parse_timestamp(row["timestamp"]),
            )
        )
    return graph
