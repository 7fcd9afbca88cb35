import json
from datetime import date, timedelta

import numpy as np

from influence_tomograph.graph import (
    EdgeKind,
    NodeKind,
    TimeWindow,
    build_graph,
    graph_from_bytes,
    graph_to_bytes,
    make_windows,
    user_node,
    user_projection,
    window_slice,
)
from influence_tomograph.ingest import Post, parse_timestamp
from influence_tomograph.synth import CorpusSpec, generate_corpus


def post(pid, author, day=1, text="", **refs):
    return Post(
        post_id=pid,
        author_id=author,
        timestamp=parse_timestamp(f"2022-03-{day:02d}T12:00:00Z"),
        text=text,
        **refs,
    )


def brute_modularity(user_graph, labels) -> float:
    """Weighted modularity from its per-community definition:
    sum over communities of in_c / (2m) - (tot_c / (2m))^2."""
    m2 = 2 * sum(user_graph.weights.values())
    if m2 == 0:
        return 0.0
    strength = {}
    internal = {}
    for (a, b), w in user_graph.weights.items():
        strength[a] = strength.get(a, 0) + w
        strength[b] = strength.get(b, 0) + w
        if labels[a] == labels[b]:
            internal[labels[a]] = internal.get(labels[a], 0) + 2 * w
    totals = {}
    for node, k in strength.items():
        totals[labels[node]] = totals.get(labels[node], 0) + k
    return sum(
        internal.get(c, 0) / m2 - (totals.get(c, 0) / m2) ** 2 for c in set(labels.values())
    )


class TestBuildGraph:
    def test_single_post_with_url(self):
        graph = build_graph([post("p1", "u1", text="https://reuters.com/a")])
        assert len(graph.users) == 1
        assert len(graph.assertions) == 2
        assert len(graph.edges) == 2
        kinds = {e.kind for e in graph.edges}
        assert kinds == {EdgeKind.POST, EdgeKind.CITE_URL}

    def test_repost_adds_edge_not_user_user(self):
        graph = build_graph([post("p1", "u1"), post("p2", "u2", repost_of="p1")])
        repost_edges = [e for e in graph.edges if e.kind is EdgeKind.REPOST]
        assert len(repost_edges) == 1
        assert repost_edges[0].user == user_node("u2")
        for edge in graph.edges:
            assert edge.user.kind is NodeKind.USER
            assert edge.assertion.kind is NodeKind.ASSERTION

    def test_missing_reference_becomes_stub(self):
        graph = build_graph([post("p2", "u2", repost_of="ghost")])
        stub = [n for n in graph.assertions if n.key == "ghost"]
        assert len(stub) == 1
        assert graph.assertion_info[stub[0]].stub

    def test_bipartiteness_on_synthetic_corpus(self):
        records = generate_corpus(CorpusSpec(seed=3))
        from influence_tomograph.ingest import parse_posts

        posts, rejects = parse_posts(json.dumps(r) for r in records)
        assert not rejects
        graph = build_graph(posts)
        for edge in graph.edges:
            assert edge.user.kind is NodeKind.USER
            assert edge.assertion.kind is NodeKind.ASSERTION
        assert graph.users.isdisjoint(graph.assertions)


class TestWindowSlice:
    def make_month_graph(self):
        posts = [post(f"p{d:02d}", f"u{d % 5}", day=d) for d in range(1, 31)]
        return build_graph(posts), posts

    def test_window_with_no_edges(self):
        graph = build_graph([post("p1", "u1", day=5)])
        window = TimeWindow(start=date(2022, 4, 1), length_days=3, index=0)
        sliced = window_slice(graph, window)
        assert not sliced.edges and not sliced.users

    def test_window_covering_everything_is_identity(self):
        graph, _ = self.make_month_graph()
        window = TimeWindow(start=date(2022, 3, 1), length_days=31, index=0)
        sliced = window_slice(graph, window)
        assert graph_to_bytes(sliced) == graph_to_bytes(graph)

    def test_consecutive_windows_share_overlap_edges(self):
        # oracle: filter edge timestamps by hand and compare the sets
        graph, _ = self.make_month_graph()
        w0 = TimeWindow(start=date(2022, 3, 1), length_days=20, index=0)
        w1 = TimeWindow(start=date(2022, 3, 2), length_days=20, index=1)
        s0 = window_slice(graph, w0)
        s1 = window_slice(graph, w1)

        def key(e):
            return (e.user.key, e.assertion.key, e.kind.value, e.timestamp.isoformat())

        expected0 = {key(e) for e in graph.edges if date(2022, 3, 1) <= e.timestamp.date() < date(2022, 3, 21)}
        expected1 = {key(e) for e in graph.edges if date(2022, 3, 2) <= e.timestamp.date() < date(2022, 3, 22)}
        assert {key(e) for e in s0.edges} == expected0
        assert {key(e) for e in s1.edges} == expected1
        overlap = expected0 & expected1
        assert overlap == {
            key(e) for e in graph.edges
            if date(2022, 3, 2) <= e.timestamp.date() < date(2022, 3, 21)
        }
        assert len(overlap) == 19

    def test_slices_union_to_full_graph(self):
        graph, _ = self.make_month_graph()
        windows = make_windows(date(2022, 3, 1), date(2022, 3, 30), 10, 10)

        def key(e):
            return (e.user.key, e.assertion.key, e.kind.value, e.timestamp.isoformat())

        union = set()
        for w in windows:
            part = {key(e) for e in window_slice(graph, w).edges}
            assert part <= {key(e) for e in graph.edges}
            union |= part
        assert union == {key(e) for e in graph.edges}


class TestUserProjection:
    def test_double_repost_weight(self):
        posts = [
            post("p1", "u1"),
            post("p2", "u2", repost_of="p1"),
            post("p3", "u2", repost_of="p1", day=2),
        ]
        projected = user_projection(build_graph(posts))
        assert projected.weight(user_node("u1"), user_node("u2")) == 2
        assert projected.weight(user_node("u2"), user_node("u1")) == 2

    def test_self_repost_excluded(self):
        posts = [post("p1", "u1"), post("p2", "u1", repost_of="p1")]
        projected = user_projection(build_graph(posts))
        assert projected.weights == {}

    def test_cite_and_post_edges_contribute_nothing(self):
        posts = [post("p1", "u1", text="https://a.com/x"), post("p2", "u2", text="https://a.com/x")]
        projected = user_projection(build_graph(posts))
        assert projected.weights == {}

    def test_planted_two_block_corpus_has_modular_projection(self):
        rng = np.random.default_rng(11)
        posts = []
        pid = 0
        pools = {0: [], 1: []}
        for step in range(600):
            block = step % 2
            author = f"b{block}u{rng.integers(20):02d}"
            pid += 1
            mine = f"p{pid:04d}"
            if pools[block] and rng.random() < 0.7:
                target_block = block if rng.random() > 0.05 else 1 - block
                pool = pools[target_block] or pools[block]
                posts.append(post(mine, author, day=int(rng.integers(28)) + 1,
                                  repost_of=pool[int(rng.integers(len(pool)))]))
            else:
                posts.append(post(mine, author, day=int(rng.integers(28)) + 1))
            pools[block].append(mine)
        projected = user_projection(build_graph(posts))
        labels = {u: u.key[1] for u in projected.users}
        assert brute_modularity(projected, labels) > 0.3


class TestSnapshotRoundTrip:
    def test_byte_identical_round_trip(self):
        records = generate_corpus(CorpusSpec(seed=5, n_posts=200))
        from influence_tomograph.ingest import parse_posts

        posts, _ = parse_posts(json.dumps(r) for r in records)
        graph = build_graph(posts)
        blob = graph_to_bytes(graph)
        assert graph_to_bytes(graph_from_bytes(blob)) == blob


class TestMakeWindows:
    def test_counts_and_bounds(self):
        windows = make_windows(date(2022, 3, 1), date(2022, 4, 7), 20, 2)
        assert len(windows) == 10
        assert windows[0].start == date(2022, 3, 1)
        assert windows[-1].start == date(2022, 3, 19)
        assert windows[-1].start + timedelta(days=19) <= date(2022, 4, 7)
