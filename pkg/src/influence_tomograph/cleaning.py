"""Structural link scoring and graph cleaning.

The scorer is a plug-in seam: anything that maps (graph, pair) to [0, 1]
can replace the neighborhood-Jaccard baseline below without touching the
stages that consume the scores.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, time, timezone
from typing import Callable

from .graph import (
    AssertionInfo,
    BipartiteInteractionGraph,
    Edge,
    EdgeKind,
    NodeId,
)

Scorer = Callable[[BipartiteInteractionGraph], "list[LinkScore]"]


@dataclass(frozen=True, slots=True)
class LinkScore:
    user: NodeId
    assertion: NodeId
    score: float
    existing: bool


class ThresholdError(ValueError):
    """A cleaning threshold falls outside [0, 1]."""


def link_score(
    adjacency: dict[NodeId, set[NodeId]], user: NodeId, assertion: NodeId
) -> float:
    """Jaccard overlap between the user's assertions and the assertions
    engaged by the assertion's other engagers.

    Both sets live on the assertion side of the bipartite graph; empty
    neighborhoods score 0.
    """
    engaged = adjacency.get(user, set())
    peer_engaged: set[NodeId] = set()
    for peer in adjacency.get(assertion, set()):
        if peer == user:
            continue
        peer_engaged |= adjacency.get(peer, set())
    union = engaged | peer_engaged
    if not union:
        return 0.0
    score = len(engaged & peer_engaged) / len(union)
    return min(1.0, max(0.0, score))


def score_links(graph: BipartiteInteractionGraph, candidate_budget: int) -> list[LinkScore]:
    """Score every existing edge and the top-scoring candidate non-edges.

    Candidates are user-assertion pairs within two co-engagement hops of
    each other (any other pair scores 0 by construction). At most
    candidate_budget candidates are returned, ranked by descending score
    with deterministic key-order tie-breaking.
    """
    if candidate_budget < 0:
        raise ValueError("candidate_budget must be >= 0")
    adjacency = graph.neighbors()
    existing = graph.edge_pairs()

    scores: list[LinkScore] = [
        LinkScore(u, a, link_score(adjacency, u, a), True)
        for u, a in sorted(existing, key=lambda p: (p[0].key, p[1].key))
    ]

    candidates: set[tuple[NodeId, NodeId]] = set()
    for user in graph.users:
        reachable: set[NodeId] = set()
        for engaged in adjacency.get(user, set()):
            for peer in adjacency.get(engaged, set()):
                reachable |= adjacency.get(peer, set())
        for assertion in reachable:
            if (user, assertion) not in existing:
                candidates.add((user, assertion))

    scored_candidates = [
        LinkScore(u, a, link_score(adjacency, u, a), False)
        for u, a in candidates
    ]
    scored_candidates.sort(key=lambda s: (-s.score, s.user.key, s.assertion.key))
    return scores + scored_candidates[:candidate_budget]


def apply_cleaning(
    graph: BipartiteInteractionGraph,
    scores: list[LinkScore],
    add_threshold: float,
    remove_threshold: float,
) -> BipartiteInteractionGraph:
    """New graph with high-scoring candidates added and low-scoring edges dropped.

    Additions require score strictly above add_threshold, so the identity
    configuration (add 1.0, remove 0.0) never rewrites the graph. Imputed
    edges are stamped with the midpoint of the graph's date range.
    """
    for name, value in (("add_threshold", add_threshold), ("remove_threshold", remove_threshold)):
        if not 0.0 <= value <= 1.0:
            raise ThresholdError(f"{name} must be in [0, 1], got {value}")

    by_pair = {(s.user, s.assertion): s for s in scores if s.existing}

    cleaned = BipartiteInteractionGraph()
    for edge in graph.edges:
        score = by_pair.get((edge.user, edge.assertion))
        if score is not None and score.score < remove_threshold:
            continue
        cleaned.add_edge(edge)

    rng = graph.date_range()
    if rng is not None:
        midpoint = rng[0] + (rng[1] - rng[0]) / 2
        stamp = datetime.combine(midpoint, time(0, 0), tzinfo=timezone.utc)
    else:
        stamp = datetime(1970, 1, 1, tzinfo=timezone.utc)

    for score in scores:
        if not score.existing and score.score > add_threshold:
            cleaned.add_edge(Edge(score.user, score.assertion, EdgeKind.IMPUTED, stamp))

    # carry over metadata, keeping entries for surviving assertions only
    cleaned.assertion_info = {
        node: graph.assertion_info.get(node, AssertionInfo(stub=True))
        for node in cleaned.assertions
    }
    return cleaned


def scores_to_bytes(scores: list[LinkScore]) -> bytes:
    """Deterministic dump of scores for offline inspection."""
    rows = [
        {
            "user": s.user.key,
            "assertion": s.assertion.key,
            "score": float(f"{s.score:.9g}"),
            "existing": s.existing,
        }
        for s in sorted(scores, key=lambda s: (not s.existing, s.user.key, s.assertion.key))
    ]
    return (json.dumps({"scores": rows}, sort_keys=True, separators=(",", ":")) + "\n").encode()
