import json

import pytest
from fastapi.testclient import TestClient

from influence_tomograph.config import load_config
from influence_tomograph.pipeline import Pipeline
from influence_tomograph.service import create_app
from influence_tomograph.synth import (
    CorpusSpec,
    generate_corpus,
    planted_lag_events,
    write_events_file,
    write_posts_file,
)


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("service")
    spec = CorpusSpec(n_users=60, n_posts=400, n_days=30, seed=21)
    write_posts_file(tmp_path / "posts.jsonl", generate_corpus(spec))
    rows = planted_lag_events(
        ("protest", "provide aid"), n_days=30, lag_days=2,
        start_day=spec.start_day, seed=22,
    )
    write_events_file(tmp_path / "events.csv", rows)
    config = load_config(
        overrides=[
            f"inputs.posts={tmp_path / 'posts.jsonl'}",
            f"inputs.events={tmp_path / 'events.csv'}",
            "inputs.event_types=[protest, provide aid]",
            "date_range.start=2022-03-01",
            "date_range.end=2022-03-30",
            "window.length_days=10",
            "window.shift_days=2",
            "window.lag_days=4",
            "discovery.min_correlation=0.6",
            "discovery.min_overlap=4",
            "embedding.epochs=40",
            "entities.influencer_count=3",
            "entities.domain_count=2",
            f"store_dir={tmp_path / 'store'}",
        ],
        seed=31,
    )
    outcome = Pipeline(config).run("all")
    return tmp_path / "store", outcome.manifest.run_id


@pytest.fixture(scope="module")
def client(fixture_run):
    store_dir, run_id = fixture_run
    app = create_app(store_dir=store_dir)
    return TestClient(app), run_id


class TestRunsEndpoint:
    def test_lists_committed_run(self, client):
        api, run_id = client
        response = api.get("/api/v1/runs")
        assert response.status_code == 200
        runs = response.json()
        assert [r["run_id"] for r in runs] == [run_id]
        assert "stage_checksums" in runs[0]
        assert runs[0]["parameters"]["window"]["length_days"] == 10

    def test_unknown_run_404(self, client):
        api, _ = client
        assert api.get("/api/v1/runs/nope/entities").status_code == 404


class TestEntitiesEndpoint:
    def test_entity_list_shape(self, client):
        api, run_id = client
        rows = api.get(f"/api/v1/runs/{run_id}/entities").json()
        kinds = {r["kind"] for r in rows}
        assert {"influencer", "community", "domain", "physical"} <= kinds
        for row in rows:
            assert set(row) == {"id", "kind", "label", "size"}


class TestInfluenceGraphEndpoint:
    def test_default_matches_run_threshold(self, client):
        api, run_id = client
        payload = api.get(f"/api/v1/runs/{run_id}/influence-graph").json()
        assert payload["min_corr"] == 0.6
        for edge in payload["edges"]:
            assert edge["r"] >= 0.6
            assert edge["lag"] >= 1
            assert edge["source"] != edge["target"]

    def test_threshold_above_one_empties_edges(self, client):
        api, run_id = client
        payload = api.get(
            f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": 1.01}
        ).json()
        assert payload["edges"] == []
        assert payload["nodes"]  # nodes untouched by threshold

    def test_monotone_in_threshold(self, client):
        api, run_id = client
        edge_sets = []
        for threshold in (0.7, 0.5, 0.4):
            payload = api.get(
                f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": threshold}
            ).json()
            edge_sets.append(
                {(e["source"], e["target"], e["lag"]) for e in payload["edges"]}
            )
        assert edge_sets[0] <= edge_sets[1] <= edge_sets[2]

    def test_entity_filter_induces_subgraph(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        chosen = [e["id"] for e in entities[:2]]
        payload = api.get(
            f"/api/v1/runs/{run_id}/influence-graph",
            params={"entities": ",".join(chosen), "min_corr": 0.01},
        ).json()
        assert {n["id"] for n in payload["nodes"]} == set(chosen)
        for edge in payload["edges"]:
            assert edge["source"] in chosen and edge["target"] in chosen

    def test_unknown_filter_entity_404(self, client):
        api, run_id = client
        response = api.get(
            f"/api/v1/runs/{run_id}/influence-graph", params={"entities": "ghost"}
        )
        assert response.status_code == 404

    def test_malformed_min_corr_is_bad_request_naming_field(self, client):
        api, run_id = client
        response = api.get(
            f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": "high"}
        )
        assert response.status_code == 400
        assert "min_corr" in response.json()["detail"]

    def test_responses_byte_stable(self, client):
        api, run_id = client
        a = api.get(f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": 0.5})
        b = api.get(f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": 0.5})
        assert a.content == b.content


class TestHeatmapEndpoint:
    def test_diagonal_and_symmetry(self, client):
        api, run_id = client
        payload = api.get(f"/api/v1/runs/{run_id}/heatmap").json()
        ids = payload["entities"]
        r = payload["r"]
        assert len(r) == len(ids)
        for i in range(len(ids)):
            assert r[i][i] == 1.0
            for j in range(len(ids)):
                assert r[i][j] == r[j][i]

    def test_planted_event_pair_peaks(self, client):
        api, run_id = client
        payload = api.get(f"/api/v1/runs/{run_id}/heatmap").json()
        ids = payload["entities"]
        i = ids.index("event:protest")
        j = ids.index("event:provide aid")
        assert payload["r"][i][j] == pytest.approx(1.0, abs=1e-6)
        assert payload["lag"][i][j] == 1
        assert payload["lead"][i][j] == "event:protest"


class TestSeriesEndpoint:
    def test_window_grid_with_nulls(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        influencer = next(e for e in entities if e["kind"] == "influencer")
        payload = api.get(
            f"/api/v1/runs/{run_id}/entities/{influencer['id']}/series"
        ).json()
        assert len(payload["windows"]) == 11
        assert len(payload["values"]) == 11
        assert payload["dim"] == 2
        for value in payload["values"]:
            assert value is None or len(value) == 2

    def test_physical_series_scalar(self, client):
        api, run_id = client
        payload = api.get(
            f"/api/v1/runs/{run_id}/entities/event:protest/series"
        ).json()
        assert payload["scalar"] is True
        assert all(v is not None and len(v) == 1 for v in payload["values"])

    def test_unknown_entity_404(self, client):
        api, run_id = client
        assert api.get(f"/api/v1/runs/{run_id}/entities/ghost/series").status_code == 404


class TestPairDrilldown:
    def test_planted_lag_recovered(self, client):
        api, run_id = client
        payload = api.get(
            f"/api/v1/runs/{run_id}/pairs/event:protest/event:provide aid"
        ).json()
        assert payload["best"] is not None
        assert payload["best"]["source"] == "event:protest"
        assert payload["best"]["lag"] == 1
        assert payload["best"]["r"] == pytest.approx(1.0, abs=1e-6)
        lags = {row["lag"] for row in payload["rows"]}
        assert lags == {0, 1, 2}  # lag_days 4 over shift 2

    def test_rows_include_both_directions(self, client):
        api, run_id = client
        payload = api.get(
            f"/api/v1/runs/{run_id}/pairs/event:protest/event:provide aid"
        ).json()
        sources = {row["source"] for row in payload["rows"]}
        assert sources == {"event:protest", "event:provide aid"}


class TestDetailEndpoint:
    def test_posts_sorted_by_engagement(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        influencer = next(e for e in entities if e["kind"] == "influencer")
        payload = api.get(
            f"/api/v1/runs/{run_id}/entities/{influencer['id']}/posts"
        ).json()
        engagements = [p["engagement"] for p in payload["posts"]]
        assert engagements == sorted(engagements, reverse=True)
        for post in payload["posts"]:
            assert len(post["excerpt"]) <= 280

    def test_limit_respected(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        community = next(e for e in entities if e["kind"] == "community")
        payload = api.get(
            f"/api/v1/runs/{run_id}/entities/{community['id']}/posts",
            params={"limit": 2},
        ).json()
        assert len(payload["posts"]) <= 2

    def test_window_range_filters(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        community = next(e for e in entities if e["kind"] == "community")
        full = api.get(
            f"/api/v1/runs/{run_id}/entities/{community['id']}/posts",
            params={"limit": 1000},
        ).json()
        narrowed = api.get(
            f"/api/v1/runs/{run_id}/entities/{community['id']}/posts",
            params={"from": 0, "to": 0, "limit": 1000},
        ).json()
        assert len(narrowed["posts"]) <= len(full["posts"])
        for post in narrowed["posts"]:
            assert post["timestamp"][:10] <= "2022-03-10"

    def test_physical_entity_has_no_posts(self, client):
        api, run_id = client
        payload = api.get(
            f"/api/v1/runs/{run_id}/entities/event:protest/posts"
        ).json()
        assert payload["posts"] == []

    def test_inverted_range_bad_request(self, client):
        api, run_id = client
        entities = api.get(f"/api/v1/runs/{run_id}/entities").json()
        response = api.get(
            f"/api/v1/runs/{run_id}/entities/{entities[0]['id']}/posts",
            params={"from": 3, "to": 1},
        )
        assert response.status_code == 400


class TestReadOnly:
    def test_no_write_methods(self, client):
        api, run_id = client
        assert api.post(f"/api/v1/runs/{run_id}/entities").status_code == 405
        assert api.delete(f"/api/v1/runs/{run_id}/entities").status_code == 405

    def test_served_edges_equal_recomputed_discover(self, client, fixture_run):
        # stored pair statistics must agree with a fresh discover at each threshold
        from influence_tomograph.discovery import DiscoveryConfig, discover
        from influence_tomograph.entities import EntityKind, series_set_from_bytes
        from influence_tomograph.store import RunStore

        api, run_id = client
        store_dir, _ = fixture_run
        store = RunStore(store_dir)
        entities_payload = json.loads(store.read_artifact(run_id, "entities.json"))
        kinds = {r["entity_id"]: EntityKind(r["kind"]) for r in entities_payload["entities"]}
        series = series_set_from_bytes(store.read_artifact(run_id, "entity_series.json"), kinds)
        for threshold in (0.7, 0.5, 0.4):
            served = api.get(
                f"/api/v1/runs/{run_id}/influence-graph", params={"min_corr": threshold}
            ).json()["edges"]
            recomputed = discover(
                series,
                DiscoveryConfig(max_lag_windows=2, min_correlation=threshold, min_overlap=4),
            ).edges
            assert [
                (e["source"], e["target"], e["lag"]) for e in served
            ] == [(e.source, e.target, e.lag) for e in recomputed]
