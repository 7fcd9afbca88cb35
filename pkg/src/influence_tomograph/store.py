"""Versioned run store with manifest-as-commit semantics.

A run directory becomes visible only once its manifest file exists, so an
interrupted save leaves an invisible, garbage-collectable directory and
readers never observe partial runs. A separate stage cache keyed by content
digests lets re-runs skip unchanged work.
"""
from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def sha256_hex(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def digest_of_mapping(values: dict) -> str:
    return sha256_hex(json.dumps(values, sort_keys=True, separators=(",", ":")).encode())


@dataclass
class RunManifest:
    run_id: str
    created_at: str
    config_digest: str
    parameters: dict
    stage_checksums: dict[str, str] = field(default_factory=dict)
    absent: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "config_digest": self.config_digest,
            "parameters": self.parameters,
            "stage_checksums": self.stage_checksums,
            "absent": self.absent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            created_at=data["created_at"],
            config_digest=data["config_digest"],
            parameters=data["parameters"],
            stage_checksums=dict(data.get("stage_checksums", {})),
            absent=list(data.get("absent", [])),
        )


class RunNotFound(KeyError):
    pass


class ArtifactNotFound(KeyError):
    pass


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.runs_dir = self.root / "runs"
        self.cache_dir = self.root / "cache"

    def save_run(
        self,
        artifacts: dict[str, bytes],
        parameters: dict,
        config_digest: str,
        absent: list[str] | None = None,
    ) -> RunManifest:
        """Write artifacts then commit by writing the manifest last."""
        created = datetime.now(timezone.utc)
        run_id = f"{created:%Y%m%dT%H%M%S}-{uuid.uuid4().hex[:8]}"
        run_dir = self.runs_dir / run_id
        run_dir.mkdir(parents=True)
        manifest = RunManifest(
            run_id=run_id,
            created_at=created.strftime("%Y-%m-%dT%H:%M:%SZ"),
            config_digest=config_digest,
            parameters=parameters,
            absent=sorted(absent or []),
        )
        for name, blob in sorted(artifacts.items()):
            self._write_artifact(run_dir, name, blob)
            manifest.stage_checksums[name] = sha256_hex(blob)
        (run_dir / MANIFEST_NAME).write_text(
            json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return manifest

    def _write_artifact(self, run_dir: Path, name: str, blob: bytes) -> None:
        (run_dir / name).write_bytes(blob)

    def list_runs(self) -> list[RunManifest]:
        """Committed runs only, newest first."""
        manifests = []
        if not self.runs_dir.exists():
            return []
        for run_dir in sorted(self.runs_dir.iterdir()):
            manifest_path = run_dir / MANIFEST_NAME
            if manifest_path.is_file():
                manifests.append(
                    RunManifest.from_dict(json.loads(manifest_path.read_text(encoding="utf-8")))
                )
        manifests.sort(key=lambda m: (m.created_at, m.run_id), reverse=True)
        return manifests

    def load_manifest(self, run_id: str) -> RunManifest:
        manifest_path = self.runs_dir / run_id / MANIFEST_NAME
        if not manifest_path.is_file():
            raise RunNotFound(run_id)
        return RunManifest.from_dict(json.loads(manifest_path.read_text(encoding="utf-8")))

    def read_artifact(self, run_id: str, name: str) -> bytes:
        manifest = self.load_manifest(run_id)
        if name not in manifest.stage_checksums:
            raise ArtifactNotFound(f"{run_id}/{name}")
        return (self.runs_dir / run_id / name).read_bytes()


class StageCache:
    """Content-keyed artifact cache shared by successive pipeline invocations."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _entry_dir(self, stage: str, key: str) -> Path:
        return self.root / stage / key

    def get(self, stage: str, key: str) -> dict[str, bytes] | None:
        entry = self._entry_dir(stage, key)
        meta_path = entry / "meta.json"
        if not meta_path.is_file():
            return None
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        artifacts: dict[str, bytes] = {}
        for name, checksum in meta["artifacts"].items():
            blob = (entry / name).read_bytes()
            if sha256_hex(blob) != checksum:
                return None
            artifacts[name] = blob
        return artifacts

    def put(self, stage: str, key: str, artifacts: dict[str, bytes]) -> None:
        entry = self._entry_dir(stage, key)
        entry.mkdir(parents=True, exist_ok=True)
        meta = {"artifacts": {}}
        for name, blob in sorted(artifacts.items()):
            (entry / name).write_bytes(blob)
            meta["artifacts"][name] = sha256_hex(blob)
        (entry / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
