"""Acceptance gate: one test per shipping criterion, each printing a
PASS/FAIL line with its runtime. Run with `pytest tests/test_acceptance.py -s`.
"""
import json
import math
import os
import subprocess
import sys
import time
from contextlib import contextmanager
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from influence_tomograph.cleaning import apply_cleaning, link_score, score_links
from influence_tomograph.config import load_config
from influence_tomograph.discovery import DiscoveryConfig, discover, pearson
from influence_tomograph.embedding import (
    EmbedConfig,
    EmbeddingTable,
    Provenance,
    loss_and_grads,
    propagate_embeddings,
    train_window_embedding,
)
from influence_tomograph.entities import EntityKind, series_set_from_bytes
from influence_tomograph.graph import (
    BipartiteInteractionGraph,
    Edge,
    EdgeKind,
    assertion_node,
    graph_to_bytes,
    user_node,
)
from influence_tomograph.service import create_app
from influence_tomograph.store import RunStore
from influence_tomograph.synth import (
    CorpusSpec,
    _ts,
    bipartite_sbm,
    echo_chambers,
    generate_corpus,
    lagged_pair_series,
    planted_lag_events,
    white_noise_series,
    write_events_file,
    write_posts_file,
)


@contextmanager
def criterion(name: str):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL {name} ({time.monotonic() - started:.1f}s)")
        raise
    print(f"ACCEPTANCE PASS {name} ({time.monotonic() - started:.1f}s)")


@pytest.fixture(scope="module")
def echo_fixture():
    """Two-chamber graph at acceptance scale, trained once, reused below."""
    graph, side_of = echo_chambers(
        users_per_side=200, assertions_per_side=400,
        engagements_per_user=16, cross_fraction=0.01, seed=2,
    )
    table, report = train_window_embedding(graph, EmbedConfig(epochs=300, seed=0))
    return graph, side_of, table, report


@pytest.fixture(scope="module")
def pipeline_workspace(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("acceptance")
    spec = CorpusSpec(n_users=1000, n_posts=5000, n_days=38, seed=77)
    write_posts_file(tmp_path / "posts.jsonl", generate_corpus(spec))
    write_events_file(
        tmp_path / "events.csv",
        planted_lag_events(("protest", "provide aid"), 38, 2, spec.start_day, seed=78),
    )
    config = {
        "inputs": {
            "posts": str(tmp_path / "posts.jsonl"),
            "events": str(tmp_path / "events.csv"),
            "event_types": ["protest", "provide aid"],
        },
        "date_range": {"start": "2022-03-01", "end": "2022-04-07"},
        "window": {"length_days": 20, "shift_days": 2, "lag_days": 5},
        "discovery": {"min_correlation": 0.4, "min_overlap": 4},
        "embedding": {"epochs": 200},
        "entities": {"influencer_count": 5, "domain_count": 3},
        "seed": 9,
        "store_dir": str(tmp_path / "store"),
    }
    config_path = tmp_path / "config.yaml"
    config_path.write_text(json.dumps(config))
    return tmp_path, config_path


def run_cli_all(config_path: Path, store_dir: Path, hash_seed: str) -> dict:
    env = dict(os.environ, PYTHONHASHSEED=hash_seed)
    result = subprocess.run(
        [
            sys.executable, "-m", "influence_tomograph.cli", "all",
            "--config", str(config_path), "--set", f"store_dir={store_dir}",
            "--jobs", "1",
        ],
        capture_output=True, text=True, env=env, timeout=300,
    )
    assert result.returncode == 0, result.stderr + result.stdout
    manifests = sorted(store_dir.glob("runs/*/manifest.json"))
    return json.loads(manifests[-1].read_text())


class TestAcceptance:
    def test_c01_table_ii_fidelity(self):
        with criterion("table-ii-preset-fidelity"):
            expectations = {
                "french-election": (20, 1, 5, 0.7),
                "philippine": (20, 2, 5, 0.5),
                "russophobia": (20, 2, 5, 0.4),
            }
            started = time.monotonic()
            for name, (length, shift, lag, r_min) in expectations.items():
                config = load_config(preset=name)
                assert config.window.length_days == length
                assert config.window.shift_days == shift
                assert config.window.lag_days == lag
                assert config.discovery.min_correlation == r_min
            from influence_tomograph.config import ConfigError

            for bad in (
                ["window.shift_days=0"],
                ["window.length_days=1", "window.shift_days=2"],
                ["window.lag_days=1", "window.shift_days=2", "window.length_days=4"],
                ["discovery.min_correlation=0"],
            ):
                with pytest.raises(ConfigError):
                    load_config(overrides=bad)
            assert time.monotonic() - started < 1.0

    def test_c02_planted_lag_oracle(self):
        with criterion("planted-lag-recovery"):
            started = time.monotonic()
            cfg = DiscoveryConfig(max_lag_windows=5, min_correlation=0.7, min_overlap=8)
            for k in range(1, 6):
                hits = 0
                for seed in range(100):
                    lead, follower = lagged_pair_series(
                        100, lag=k, coefficient=0.9, noise_sigma=0.1,
                        seed=1000 * k + seed, lead_id="x", follower_id="y",
                    )
                    graph = discover([lead, follower], cfg)
                    edges = graph.edges
                    if (
                        len(edges) == 1
                        and edges[0].source == "x"
                        and edges[0].target == "y"
                        and edges[0].lag == k
                        and edges[0].r > 0.9
                    ):
                        hits += 1
                assert hits >= 95, f"lag {k}: only {hits}/100 seeds recovered"
            assert time.monotonic() - started < 10.0

    def test_c03_null_false_positive_rate(self):
        with criterion("null-false-positive-rate"):
            started = time.monotonic()
            cfg = DiscoveryConfig(max_lag_windows=5, min_correlation=0.7, min_overlap=8)
            total_edges = 0
            total_pairs = 0
            for seed in range(20):
                series = [
                    white_noise_series(f"e{i:02d}", 100, seed=seed * 100 + i)
                    for i in range(50)
                ]
                graph = discover(series, cfg)
                total_edges += len(graph.edges)
                total_pairs += len(graph.pair_stats)
            assert total_edges <= 0.02 * total_pairs, (
                f"{total_edges} edges over {total_pairs} pairs"
            )
            assert time.monotonic() - started < 60.0

    def test_c04_pearson_correctness(self):
        with criterion("pearson-vs-naive-reference"):
            def naive(x, y):
                pairs = [
                    (a, b) for a, b in zip(x, y)
                    if not (math.isnan(a) or math.isnan(b))
                ]
                n = len(pairs)
                if n < 2:
                    return None
                mx = sum(a for a, _ in pairs) / n
                my = sum(b for _, b in pairs) / n
                sxy = sum((a - mx) * (b - my) for a, b in pairs)
                sxx = sum((a - mx) ** 2 for a, _ in pairs)
                syy = sum((b - my) ** 2 for _, b in pairs)
                if sxx == 0 or syy == 0:
                    return None
                return sxy / math.sqrt(sxx * syy)

            rng = np.random.default_rng(4)
            for _ in range(10_000):
                n = int(rng.integers(2, 30))
                x = rng.standard_normal(n)
                y = rng.standard_normal(n)
                if rng.random() < 0.2:
                    x[int(rng.integers(n))] = np.nan
                ours = pearson(x, y)
                ref = naive(x.tolist(), y.tolist())
                if ref is None:
                    assert ours is None
                else:
                    assert abs(ours - ref) <= 1e-12
                    assert abs(ours) <= 1 + 1e-12

    def test_c05_embedding_axis_purity(self, echo_fixture):
        with criterion("echo-chamber-axis-purity"):
            started = time.monotonic()
            graph, side_of, table, report = echo_fixture
            vectors = {node: vec for node, vec in table.vectors.items()}
            sides = {0: [], 1: []}
            for node, vec in vectors.items():
                sides[side_of[node]].append(vec)
            side_means = {s: np.mean(np.stack(v), axis=0) for s, v in sides.items()}
            side_axes = {s: int(np.argmax(m)) for s, m in side_means.items()}
            assert side_axes[0] != side_axes[1], "both chambers on the same axis"
            correct = sum(
                1 for node, vec in vectors.items()
                if int(np.argmax(vec)) == side_axes[side_of[node]]
            )
            purity = correct / len(vectors)
            assert purity >= 0.9, f"axis purity {purity:.3f}"
            assert report.final_loss <= report.initial_loss
            assert time.monotonic() - started < 120.0

    def test_c06_positive_quadrant_and_orthogonality(self, echo_fixture):
        with criterion("positive-quadrant-orthogonality"):
            graph, _, table, _ = echo_fixture
            mat = np.stack([vec for _, vec in table.sorted_items()])
            assert np.all(mat >= 0)
            assert np.all(np.isfinite(mat))
            norms = np.linalg.norm(mat, axis=0)
            norms[norms == 0] = 1.0
            gram = (mat / norms).T @ (mat / norms)
            off = np.abs(gram - np.diag(np.diag(gram))).max()
            assert off <= 0.2, f"off-diagonal normalized Gram {off:.3f}"
            # propagation output honors the quadrant too
            full = propagate_embeddings(table, graph)
            for _, vec in full.sorted_items():
                assert np.all(vec >= 0)

    def test_c07_gradient_check(self):
        with criterion("analytic-gradients-vs-finite-differences"):
            rng = np.random.default_rng(6)
            # 6-node graph: 3 users, 3 assertions, 4 edges
            positives = np.array([[0, 3], [0, 4], [1, 4], [2, 5]])
            negatives = np.array([[0, 5], [1, 3], [2, 4]])
            checked = 0
            for trial in range(3):
                m = rng.uniform(-0.8, 0.8, size=(6, 2))
                s = rng.uniform(-2.5, -0.5, size=(6, 2))
                eps = rng.standard_normal((6, 2))
                kl_w, ortho_w, pos_w = 0.1, 1.0, 5.0
                _, _, dm, ds = loss_and_grads(
                    m, s, positives, negatives, eps, kl_w, ortho_w, pos_w
                )
                z_pre = np.maximum(m, 0) + np.exp(0.5 * s) * eps
                step = 1e-5
                for i in range(6):
                    for j in range(2):
                        if abs(m[i, j]) <= 1e-3 or abs(z_pre[i, j]) <= 1e-3:
                            continue
                        for which, grad in (("m", dm), ("s", ds)):
                            plus = (m.copy(), s.copy())
                            minus = (m.copy(), s.copy())
                            target = 0 if which == "m" else 1
                            plus[target][i, j] += step
                            minus[target][i, j] -= step
                            up = loss_and_grads(
                                plus[0], plus[1], positives, negatives, eps,
                                kl_w, ortho_w, pos_w,
                            )[0]
                            down = loss_and_grads(
                                minus[0], minus[1], positives, negatives, eps,
                                kl_w, ortho_w, pos_w,
                            )[0]
                            numeric = (up - down) / (2 * step)
                            analytic = grad[i, j]
                            denom = max(abs(numeric), abs(analytic), 1e-8)
                            rel = abs(numeric - analytic) / denom
                            assert rel < 1e-4, (
                                f"{which}[{i},{j}]: rel error {rel:.2e}"
                            )
                            checked += 1
            assert checked > 50

    def test_c08_propagation_oracle(self):
        with criterion("propagation-vs-bfs-reachability"):
            rng = np.random.default_rng(8)
            for trial in range(8):
                n_users = int(rng.integers(20, 100))
                n_assertions = int(rng.integers(20, 100))
                graph = BipartiteInteractionGraph()
                for _ in range(int(rng.integers(50, 250))):
                    graph.add_edge(
                        Edge(
                            user_node(f"u{rng.integers(n_users)}"),
                            assertion_node(f"a{rng.integers(n_assertions)}"),
                            EdgeKind.REPLY,
                            _ts(date(2022, 3, 1)),
                        )
                    )
                nodes = sorted(graph.users | graph.assertions, key=lambda n: (n.kind.value, n.key))
                trained = EmbeddingTable(dim=2)
                for node in nodes[:: max(1, len(nodes) // 10)]:
                    trained.set(node, rng.uniform(0, 1, 2), Provenance.TRAINED)

                full = propagate_embeddings(trained, graph)

                # oracle: BFS layers from the trained seed set
                adjacency = graph.neighbors()
                layer = {node: 0 for node in trained.vectors if node in adjacency}
                frontier = sorted(layer, key=lambda n: (n.kind.value, n.key))
                depth = 0
                while frontier:
                    depth += 1
                    nxt = []
                    for node in frontier:
                        for nb in adjacency[node]:
                            if nb not in layer:
                                layer[nb] = depth
                                nxt.append(nb)
                    frontier = sorted(nxt, key=lambda n: (n.kind.value, n.key))

                for node in nodes:
                    if node in layer:
                        assert full.provenance_of(node) in (
                            Provenance.TRAINED, Provenance.PROPAGATED
                        )
                    else:
                        assert full.provenance_of(node) is Provenance.MISSING

                # exact value check: mean of neighbors exactly one layer up
                for node in nodes:
                    if full.provenance_of(node) is not Provenance.PROPAGATED:
                        continue
                    k = layer[node]
                    upstream = [
                        full.vectors[nb]
                        for nb in sorted(adjacency[node], key=lambda n: (n.kind.value, n.key))
                        if layer.get(nb, -1) == k - 1
                    ]
                    expected = np.mean(upstream, axis=0)
                    assert np.array_equal(full.vectors[node], expected)

                # exact fixed point: a second run changes nothing
                again = propagate_embeddings(full, graph)
                assert set(again.vectors) == set(full.vectors)
                for node, vec in full.vectors.items():
                    assert np.array_equal(again.vectors[node], vec)

    def test_c09_cleaning_oracle(self):
        with criterion("cleaning-auc-and-identity-noop"):
            graph, _ = bipartite_sbm(60, 80, 2, 0.25, 0.01, seed=4)
            rng = np.random.default_rng(5)
            edges = sorted(graph.edge_pairs(), key=lambda p: (p[0].key, p[1].key))
            hidden_idx = rng.choice(len(edges), size=max(1, len(edges) // 20), replace=False)
            hidden = {edges[i] for i in hidden_idx}
            visible = BipartiteInteractionGraph()
            for edge in graph.edges:
                if (edge.user, edge.assertion) not in hidden:
                    visible.add_edge(edge)
            adjacency = visible.neighbors()
            non_edges = sorted(
                {(u, a) for u in graph.users for a in graph.assertions} - graph.edge_pairs(),
                key=lambda p: (p[0].key, p[1].key),
            )
            sampled = [non_edges[i] for i in rng.choice(len(non_edges), 300, replace=False)]

            def safe(u, a):
                if u not in adjacency or a not in adjacency:
                    return 0.0
                return link_score(adjacency, u, a)

            pos = [safe(u, a) for u, a in sorted(hidden, key=lambda p: (p[0].key, p[1].key))]
            neg = [safe(u, a) for u, a in sampled]
            wins = sum(1 for p in pos for q in neg if p > q)
            ties = sum(1 for p in pos for q in neg if p == q)
            auc = (wins + 0.5 * ties) / (len(pos) * len(neg))
            assert auc > 0.8, f"AUC {auc:.3f}"

            scores = score_links(graph, candidate_budget=500)
            cleaned = apply_cleaning(graph, scores, add_threshold=1.0, remove_threshold=0.0)
            assert graph_to_bytes(cleaned) == graph_to_bytes(graph)

    def test_c10_pipeline_determinism_and_scale(self, pipeline_workspace):
        with criterion("pipeline-determinism-and-scale"):
            tmp_path, config_path = pipeline_workspace
            started = time.monotonic()
            first = run_cli_all(config_path, tmp_path / "store-a", hash_seed="101")
            elapsed = time.monotonic() - started
            assert elapsed < 60.0, f"run all took {elapsed:.1f}s"
            second = run_cli_all(config_path, tmp_path / "store-b", hash_seed="202")
            assert first["stage_checksums"] == second["stage_checksums"]
            assert first["run_id"] != second["run_id"]

    def test_c11_threshold_monotonicity_end_to_end(self, pipeline_workspace):
        with criterion("served-thresholds-match-recompute"):
            tmp_path, config_path = pipeline_workspace
            store_dir = tmp_path / "store-a"
            store = RunStore(store_dir)
            run_id = store.list_runs()[0].run_id
            api = TestClient(create_app(store_dir=store_dir))

            entities_payload = json.loads(store.read_artifact(run_id, "entities.json"))
            kinds = {
                row["entity_id"]: EntityKind(row["kind"])
                for row in entities_payload["entities"]
            }
            series = series_set_from_bytes(
                store.read_artifact(run_id, "entity_series.json"), kinds
            )
            previous = None
            for threshold in (0.7, 0.5, 0.4):
                served = api.get(
                    f"/api/v1/runs/{run_id}/influence-graph",
                    params={"min_corr": threshold},
                ).json()["edges"]
                served_keys = [(e["source"], e["target"], e["lag"]) for e in served]
                recomputed = discover(
                    series,
                    DiscoveryConfig(
                        max_lag_windows=2, min_correlation=threshold, min_overlap=4
                    ),
                ).edges
                assert served_keys == [(e.source, e.target, e.lag) for e in recomputed]
                for edge_served, edge_re in zip(served, recomputed):
                    assert abs(edge_served["r"] - edge_re.r) < 1e-9
                if previous is not None:
                    assert set(previous) <= set(served_keys)
                previous = served_keys
