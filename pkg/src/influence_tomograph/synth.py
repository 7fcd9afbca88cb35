"""Synthetic corpora and graphs with planted structure.

Every generator takes an explicit seed and returns its ground truth next to
the generated object, so tests can verify recovered structure against the
planted one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from .entities import EntityTimeSeries
from .graph import (
    BipartiteInteractionGraph,
    Edge,
    EdgeKind,
    NodeId,
    assertion_node,
    user_node,
)


def _ts(day: date, second_of_day: int = 43200) -> datetime:
    return datetime.combine(day, time(0, 0), tzinfo=timezone.utc) + timedelta(
        seconds=second_of_day
    )


def bipartite_sbm(
    n_users: int,
    n_assertions: int,
    n_blocks: int,
    p_in: float,
    p_out: float,
    seed: int,
    base_day: date = date(2022, 3, 1),
) -> tuple[BipartiteInteractionGraph, dict[NodeId, int]]:
    """Stochastic block model over user-assertion pairs.

    Users and assertions are split evenly into blocks; a pair inside one
    block draws an edge with p_in, across blocks with p_out.
    """
    rng = np.random.default_rng(seed)
    graph = BipartiteInteractionGraph()
    blocks: dict[NodeId, int] = {}
    users = [user_node(f"u{i:04d}") for i in range(n_users)]
    assertions = [assertion_node(f"a{i:04d}") for i in range(n_assertions)]
    for i, node in enumerate(users):
        blocks[node] = i * n_blocks // n_users
    for i, node in enumerate(assertions):
        blocks[node] = i * n_blocks // n_assertions
    probs = rng.random((n_users, n_assertions))
    for i, u in enumerate(users):
        for j, a in enumerate(assertions):
            p = p_in if blocks[u] == blocks[a] else p_out
            if probs[i, j] < p:
                graph.add_edge(Edge(u, a, EdgeKind.REPLY, _ts(base_day)))
    for a in assertions:
        if a in graph.assertions:
            from .graph import AssertionInfo

            graph.assertion_info[a] = AssertionInfo(author_id=None, stub=True)
    return graph, blocks


def echo_chambers(
    users_per_side: int,
    assertions_per_side: int,
    engagements_per_user: int,
    cross_fraction: float,
    seed: int,
    base_day: date = date(2022, 3, 1),
    n_days: int = 1,
) -> tuple[BipartiteInteractionGraph, dict[NodeId, int]]:
    """Two engagement clusters with a small fraction of cross-side edges."""
    rng = np.random.default_rng(seed)
    graph = BipartiteInteractionGraph()
    side_of: dict[NodeId, int] = {}
    assertions_by_side = []
    for side in range(2):
        pool = [assertion_node(f"s{side}a{i:04d}") for i in range(assertions_per_side)]
        assertions_by_side.append(pool)
        for node in pool:
            side_of[node] = side
    for side in range(2):
        for i in range(users_per_side):
            u = user_node(f"s{side}u{i:04d}")
            side_of[u] = side
            for _ in range(engagements_per_user):
                target_side = side if rng.random() >= cross_fraction else 1 - side
                pool = assertions_by_side[target_side]
                a = pool[int(rng.integers(len(pool)))]
                day = base_day + timedelta(days=int(rng.integers(n_days)))
                graph.add_edge(Edge(u, a, EdgeKind.REPLY, _ts(day, int(rng.integers(86400)))))
    from .graph import AssertionInfo

    for a in graph.assertions:
        graph.assertion_info[a] = AssertionInfo(author_id=None, stub=True)
    return graph, side_of


def zipf_degree_graph(
    n_users: int, n_assertions: int, n_edges: int, alpha: float, seed: int
) -> BipartiteInteractionGraph:
    """Bipartite graph whose endpoints are drawn from a Zipf-like weighting."""
    rng = np.random.default_rng(seed)
    user_weights = np.arange(1, n_users + 1, dtype=np.float64) ** (-alpha)
    user_weights /= user_weights.sum()
    assertion_weights = np.arange(1, n_assertions + 1, dtype=np.float64) ** (-alpha)
    assertion_weights /= assertion_weights.sum()
    graph = BipartiteInteractionGraph()
    us = rng.choice(n_users, size=n_edges, p=user_weights)
    bs = rng.choice(n_assertions, size=n_edges, p=assertion_weights)
    for i in range(n_edges):
        graph.add_edge(
            Edge(
                user_node(f"u{us[i]:05d}"),
                assertion_node(f"a{bs[i]:05d}"),
                EdgeKind.REPLY,
                _ts(date(2022, 3, 1)),
            )
        )
    return graph


def chamber_shift_graph(
    n_windows: int,
    shift_window: int,
    users_per_group: int,
    assertions_per_chamber: int,
    engagements: int,
    seed: int,
    base_day: date = date(2022, 3, 1),
    window_days: int = 5,
) -> tuple[BipartiteInteractionGraph, dict[str, list[NodeId]], list]:
    """Three user groups over consecutive windows; the migrating group moves
    from chamber A to chamber B at shift_window.

    Returns the graph, a dict of group name to members, and the windows.
    """
    from .graph import AssertionInfo, TimeWindow

    rng = np.random.default_rng(seed)
    graph = BipartiteInteractionGraph()
    chambers = {
        "A": [assertion_node(f"chA{i:03d}") for i in range(assertions_per_chamber)],
        "B": [assertion_node(f"chB{i:03d}") for i in range(assertions_per_chamber)],
    }
    groups = {
        "loyal_a": [user_node(f"ga{i:03d}") for i in range(users_per_group)],
        "loyal_b": [user_node(f"gb{i:03d}") for i in range(users_per_group)],
        "migrating": [user_node(f"gm{i:03d}") for i in range(users_per_group)],
    }
    windows = [
        TimeWindow(start=base_day + timedelta(days=w * window_days), length_days=window_days, index=w)
        for w in range(n_windows)
    ]
    for w, window in enumerate(windows):
        for group, members in groups.items():
            if group == "loyal_a":
                chamber = "A"
            elif group == "loyal_b":
                chamber = "B"
            else:
                chamber = "A" if w < shift_window else "B"
            pool = chambers[chamber]
            for u in members:
                for _ in range(engagements):
                    a = pool[int(rng.integers(len(pool)))]
                    day = window.start + timedelta(days=int(rng.integers(window_days)))
                    graph.add_edge(
                        Edge(u, a, EdgeKind.REPLY, _ts(day, int(rng.integers(86400))))
                    )
    for a in graph.assertions:
        graph.assertion_info[a] = AssertionInfo(author_id=None, stub=True)
    return graph, groups, windows


def white_noise_series(
    entity_id: str, n_windows: int, seed: int
) -> EntityTimeSeries:
    rng = np.random.default_rng(seed)
    values = [np.array([float(v)]) for v in rng.standard_normal(n_windows)]
    return EntityTimeSeries(entity_id=entity_id, scalar=True, values=values)


def lagged_pair_series(
    n_windows: int,
    lag: int,
    coefficient: float,
    noise_sigma: float,
    seed: int,
    lead_id: str = "x",
    follower_id: str = "y",
) -> tuple[EntityTimeSeries, EntityTimeSeries]:
    """Scalar pair where the follower copies the lead k windows later."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n_windows + lag)
    noise = rng.normal(0.0, noise_sigma, size=n_windows)
    lead = x[lag:]
    follower = coefficient * x[:n_windows] + noise
    lead_series = EntityTimeSeries(
        entity_id=lead_id, scalar=True, values=[np.array([v]) for v in lead]
    )
    follower_series = EntityTimeSeries(
        entity_id=follower_id, scalar=True, values=[np.array([v]) for v in follower]
    )
    return lead_series, follower_series


@dataclass(frozen=True)
class CorpusSpec:
    n_users: int = 120
    n_posts: int = 900
    n_groups: int = 3
    n_days: int = 30
    start_day: date = date(2022, 3, 1)
    repost_prob: float = 0.45
    reply_prob: float = 0.15
    cite_prob: float = 0.25
    cross_group_prob: float = 0.03
    hosts: tuple[str, ...] = ("reuters.com", "lemonde.fr", "rt.com")
    seed: int = 7


def generate_corpus(spec: CorpusSpec) -> list[dict]:
    """Post records (wire format dicts) for a grouped interaction corpus.

    Users belong to groups; reposts and replies stay inside the group most
    of the time, and each group prefers one news host, so communities,
    influencers and domains are all recoverable downstream.
    """
    rng = np.random.default_rng(spec.seed)
    group_of = {f"u{i:04d}": i % spec.n_groups for i in range(spec.n_users)}
    users = sorted(group_of)
    group_members: dict[int, list[str]] = {}
    for user, group in group_of.items():
        group_members.setdefault(group, []).append(user)
    for members in group_members.values():
        members.sort()

    records: list[dict] = []
    posts_by_group: dict[int, list[str]] = {g: [] for g in range(spec.n_groups)}
    for i in range(spec.n_posts):
        # weight early users heavier so each group has clear influencers
        group = int(rng.integers(spec.n_groups))
        members = group_members[group]
        ranks = np.arange(1, len(members) + 1, dtype=np.float64) ** -1.3
        author = members[int(rng.choice(len(members), p=ranks / ranks.sum()))]
        day = spec.start_day + timedelta(days=int(rng.integers(spec.n_days)))
        ts = _ts(day, int(rng.integers(86400)))
        post_id = f"p{i:05d}"
        record: dict = {
            "id": post_id,
            "author_id": author,
            "timestamp": ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "text": f"post {i} from group {group}",
        }
        roll = rng.random()
        target_group = group
        if rng.random() < spec.cross_group_prob:
            target_group = int(rng.integers(spec.n_groups))
        pool = posts_by_group[target_group]
        if roll < spec.repost_prob and pool:
            record["repost_of"] = pool[int(rng.integers(len(pool)))]
            record["text"] = ""
        elif roll < spec.repost_prob + spec.reply_prob and pool:
            record["reply_to"] = pool[int(rng.integers(len(pool)))]
        if rng.random() < spec.cite_prob:
            host = spec.hosts[group % len(spec.hosts)]
            record["text"] += f" https://{host}/story/{int(rng.integers(40))}"
        records.append(record)
        posts_by_group[group].append(post_id)
    return records


def planted_lag_events(
    event_types: tuple[str, str],
    n_days: int,
    lag_days: int,
    start_day: date,
    seed: int,
) -> list[dict]:
    """Daily count rows where the second event type copies the first,
    shifted by lag_days."""
    rng = np.random.default_rng(seed)
    base = np.abs(np.cumsum(rng.integers(-3, 4, size=n_days + lag_days))) + 1
    rows = []
    for d in range(n_days):
        day = (start_day + timedelta(days=d)).isoformat()
        rows.append({"date": day, "event_type": event_types[0], "count": int(base[d + lag_days])})
        rows.append({"date": day, "event_type": event_types[1], "count": int(base[d])})
    return rows


def write_posts_file(path: Path, records: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_events_file(path: Path, rows: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("date,event_type,count\n")
        for row in rows:
            fh.write(f"{row['date']},{row['event_type']},{row['count']}\n")
