"""Pipeline configuration: file loading, presets, overrides, validation.

Precedence is command-line overrides over file values over preset values
over defaults. Validation failures always name the offending field.
"""
from __future__ import annotations

import json
from datetime import date
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from .discovery import DiscoveryConfig
from .embedding import EmbedConfig
from .entities import EntityConfig


class ConfigError(ValueError):
    pass


class InputsConfig(BaseModel):
    posts: str | None = None
    events: str | None = None
    event_types: list[str] = Field(default_factory=list)


class DateRangeConfig(BaseModel):
    start: date
    end: date

    @model_validator(mode="after")
    def _ordered(self) -> "DateRangeConfig":
        if self.end < self.start:
            raise ValueError("date_range.end must not precede date_range.start")
        return self


class WindowConfig(BaseModel):
    length_days: int = 20
    shift_days: int = 1
    lag_days: int = 5

    @model_validator(mode="after")
    def _invariants(self) -> "WindowConfig":
        if self.shift_days < 1:
            raise ValueError("window.shift_days must be >= 1")
        if self.length_days < self.shift_days:
            raise ValueError("window.length_days must be >= window.shift_days")
        if self.lag_days < self.shift_days:
            raise ValueError("window.lag_days must be >= window.shift_days")
        return self

    @property
    def lag_windows(self) -> int:
        """Maximum lag in window-shift steps."""
        return self.lag_days // self.shift_days


class DiscoverySection(BaseModel):
    min_correlation: float = 0.7
    min_overlap: int = 8
    use_absolute: bool = False

    @model_validator(mode="after")
    def _invariants(self) -> "DiscoverySection":
        if not 0.0 < self.min_correlation <= 1.0:
            raise ValueError("discovery.min_correlation must be in (0, 1]")
        if self.min_overlap < 1:
            raise ValueError("discovery.min_overlap must be >= 1")
        return self


class EmbeddingSection(BaseModel):
    latent_dim: int = 2
    epochs: int = 300
    learning_rate: float = 0.05
    kl_weight: float = 0.1
    ortho_weight: float = 1.0
    negative_ratio: int = 5
    popular_user_count: int = 2000
    popular_assertion_count: int = 2000
    restarts: int = 2

    @model_validator(mode="after")
    def _invariants(self) -> "EmbeddingSection":
        if not 2 <= self.latent_dim <= 4:
            raise ValueError("embedding.latent_dim must be between 2 and 4")
        if self.epochs < 0:
            raise ValueError("embedding.epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("embedding.learning_rate must be positive")
        if self.kl_weight < 0:
            raise ValueError("embedding.kl_weight must be >= 0")
        if self.ortho_weight < 0:
            raise ValueError("embedding.ortho_weight must be >= 0")
        if self.negative_ratio < 1:
            raise ValueError("embedding.negative_ratio must be >= 1")
        if self.popular_user_count < 1 or self.popular_assertion_count < 1:
            raise ValueError("embedding.popular_user_count and popular_assertion_count must be >= 1")
        if self.restarts < 1:
            raise ValueError("embedding.restarts must be >= 1")
        return self


class CleaningSection(BaseModel):
    add_threshold: float = 0.95
    remove_threshold: float = 0.02
    candidate_budget: int = 10000
    dump_scores: bool = False

    @model_validator(mode="after")
    def _invariants(self) -> "CleaningSection":
        if not 0.0 <= self.add_threshold <= 1.0:
            raise ValueError("cleaning.add_threshold must be in [0, 1]")
        if not 0.0 <= self.remove_threshold <= 1.0:
            raise ValueError("cleaning.remove_threshold must be in [0, 1]")
        if self.candidate_budget < 0:
            raise ValueError("cleaning.candidate_budget must be >= 0")
        return self


class EntitiesSection(BaseModel):
    influencer_count: int = 20
    domain_count: int = 20
    min_community_size: int = 3
    community_max_iters: int = 50

    @model_validator(mode="after")
    def _invariants(self) -> "EntitiesSection":
        if self.influencer_count < 0 or self.domain_count < 0:
            raise ValueError("entities.influencer_count and domain_count must be >= 0")
        if self.min_community_size < 1:
            raise ValueError("entities.min_community_size must be >= 1")
        if self.community_max_iters < 1:
            raise ValueError("entities.community_max_iters must be >= 1")
        return self


class PipelineConfig(BaseModel):
    inputs: InputsConfig = Field(default_factory=InputsConfig)
    date_range: DateRangeConfig | None = None
    window: WindowConfig = Field(default_factory=WindowConfig)
    discovery: DiscoverySection = Field(default_factory=DiscoverySection)
    embedding: EmbeddingSection = Field(default_factory=EmbeddingSection)
    cleaning: CleaningSection = Field(default_factory=CleaningSection)
    entities: EntitiesSection = Field(default_factory=EntitiesSection)
    seed: int = 0
    store_dir: str = "./influence-store"

    def embed_config(self) -> EmbedConfig:
        e = self.embedding
        return EmbedConfig(
            latent_dim=e.latent_dim,
            epochs=e.epochs,
            learning_rate=e.learning_rate,
            kl_weight=e.kl_weight,
            ortho_weight=e.ortho_weight,
            negative_ratio=e.negative_ratio,
            popular_user_count=e.popular_user_count,
            popular_assertion_count=e.popular_assertion_count,
            restarts=e.restarts,
            seed=self.seed,
        )

    def discovery_config(self) -> DiscoveryConfig:
        d = self.discovery
        return DiscoveryConfig(
            max_lag_windows=self.window.lag_windows,
            min_correlation=d.min_correlation,
            min_overlap=d.min_overlap,
            use_absolute=d.use_absolute,
        )

    def entity_config(self) -> EntityConfig:
        e = self.entities
        return EntityConfig(
            influencer_count=e.influencer_count,
            domain_count=e.domain_count,
            min_community_size=e.min_community_size,
            community_max_iters=e.community_max_iters,
            event_types=tuple(self.inputs.event_types),
        )

    def canonical_dict(self) -> dict:
        block = self.model_dump(mode="json")
        block["derived"] = {"lag_windows": self.window.lag_windows}
        return block

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))


PRESETS: dict[str, dict] = {
    "french-election": {
        "window": {"length_days": 20, "shift_days": 1, "lag_days": 5},
        "discovery": {"min_correlation": 0.7},
    },
    "philippine": {
        "window": {"length_days": 20, "shift_days": 2, "lag_days": 5},
        "discovery": {"min_correlation": 0.5},
    },
    "russophobia": {
        "window": {"length_days": 20, "shift_days": 2, "lag_days": 5},
        "discovery": {"min_correlation": 0.4},
    },
}


def _deep_merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_override(expression: str) -> tuple[list[str], Any]:
    """Split a dotted-path override like discovery.min_correlation=0.5."""
    if "=" not in expression:
        raise ConfigError(f"override {expression!r} must look like section.field=value")
    path, raw = expression.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {expression!r} has an empty field path")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return keys, value


def _apply_override(data: dict, keys: list[str], value: Any) -> None:
    cursor = data
    for key in keys[:-1]:
        nxt = cursor.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            cursor[key] = nxt
        cursor = nxt
    cursor[keys[-1]] = value


def load_config(
    path: str | Path | None = None,
    preset: str | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> PipelineConfig:
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        data = _deep_merge(data, PRESETS[preset])
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")
        try:
            loaded = yaml.safe_load(file_path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping at top level")
        data = _deep_merge(data, loaded)
    for expression in overrides or []:
        keys, value = parse_override(expression)
        _apply_override(data, keys, value)
    if seed is not None:
        data["seed"] = seed
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(loc) for loc in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {details}") from exc
