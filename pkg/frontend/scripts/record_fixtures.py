"""Record API payloads from a real pipeline run into test/fixtures/.

The console tests run against these snapshots, so they exercise the exact
wire format the service produces. Re-run after any API change:

    python3 frontend/scripts/record_fixtures.py
"""
from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

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

FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"

PLANTED_LAG_DAYS = 2
SHIFT_DAYS = 1
PLANTED_LAG_WINDOWS = PLANTED_LAG_DAYS // SHIFT_DAYS


def build_run(tmp: Path) -> tuple[Path, str]:
    spec = CorpusSpec(n_users=60, n_posts=400, n_days=30, seed=41)
    write_posts_file(tmp / "posts.jsonl", generate_corpus(spec))
    write_events_file(
        tmp / "events.csv",
        planted_lag_events(
            ("protest", "provide aid"), n_days=30, lag_days=PLANTED_LAG_DAYS,
            start_day=spec.start_day, seed=42,
        ),
    )
    config = load_config(
        overrides=[
            f"inputs.posts={tmp / 'posts.jsonl'}",
            f"inputs.events={tmp / 'events.csv'}",
            "inputs.event_types=[protest, provide aid]",
            "date_range.start=2022-03-01",
            "date_range.end=2022-03-30",
            "window.length_days=10",
            f"window.shift_days={SHIFT_DAYS}",
            "window.lag_days=3",
            "discovery.min_correlation=0.6",
            "discovery.min_overlap=4",
            "embedding.epochs=60",
            "entities.influencer_count=3",
            "entities.domain_count=2",
            f"store_dir={tmp / 'store'}",
        ],
        seed=43,
    )
    outcome = Pipeline(config).run("all")
    return tmp / "store", outcome.manifest.run_id


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmpdir:
        store_dir, run_id = build_run(Path(tmpdir))
        api = TestClient(create_app(store_dir=store_dir))

        def grab(name: str, url: str) -> dict | list:
            response = api.get(url)
            response.raise_for_status()
            payload = response.json()
            (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            return payload

        grab("runs.json", "/api/v1/runs")
        entities = grab("entities.json", f"/api/v1/runs/{run_id}/entities")
        grab("heatmap.json", f"/api/v1/runs/{run_id}/heatmap")

        # two thresholds whose edge sets strictly differ, for the slider test
        ladder = []
        for i in range(3, 19):
            threshold = round(i * 0.05, 2)
            payload = api.get(
                f"/api/v1/runs/{run_id}/influence-graph",
                params={"min_corr": threshold},
            ).json()
            ladder.append((threshold, payload))
        chosen = None
        for low_t, low_p in ladder:
            for high_t, high_p in ladder:
                if high_t > low_t and len(high_p["edges"]) < len(low_p["edges"]):
                    low_keys = {(e["source"], e["target"]) for e in low_p["edges"]}
                    high_keys = {(e["source"], e["target"]) for e in high_p["edges"]}
                    if high_keys < low_keys:
                        chosen = (low_t, low_p, high_t, high_p)
                        break
            if chosen:
                break
        if not chosen:
            print("no strictly-shrinking threshold pair found; adjust the corpus", file=sys.stderr)
            return 1
        low_t, low_p, high_t, high_p = chosen
        (FIXTURES / "influence_low.json").write_text(json.dumps(low_p, indent=2, sort_keys=True) + "\n")
        (FIXTURES / "influence_high.json").write_text(json.dumps(high_p, indent=2, sort_keys=True) + "\n")

        pair = ("event:protest", "event:provide aid")
        drill = grab("pair_events.json", f"/api/v1/runs/{run_id}/pairs/{pair[0]}/{pair[1]}")
        assert drill["best"]["lag"] == PLANTED_LAG_WINDOWS, drill["best"]
        grab("series_protest.json", f"/api/v1/runs/{run_id}/entities/{pair[0]}/series")
        grab("series_aid.json", f"/api/v1/runs/{run_id}/entities/{pair[1]}/series")

        influencer = next(e for e in entities if e["kind"] == "influencer")
        grab(
            "detail_influencer.json",
            f"/api/v1/runs/{run_id}/entities/{influencer['id']}/posts?limit=10",
        )
        # an embedding-backed series with at least one rendered vector
        grab(
            "series_influencer.json",
            f"/api/v1/runs/{run_id}/entities/{influencer['id']}/series",
        )

        meta = {
            "run_id": run_id,
            "planted_lag_windows": PLANTED_LAG_WINDOWS,
            "pair": list(pair),
            "low_threshold": low_t,
            "high_threshold": high_t,
            "influencer": influencer["id"],
        }
        (FIXTURES / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        print(f"fixtures recorded from run {run_id}")
        print(f"thresholds: {low_t} ({len(low_p['edges'])} edges) -> {high_t} ({len(high_p['edges'])} edges)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
