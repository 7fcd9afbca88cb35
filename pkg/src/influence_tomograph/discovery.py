"""Directed influence edges from lagged Pearson correlation of entity series.

Direction needs a strict lead: only lags of at least one window shift count
as evidence, while lag-0 co-movement is surfaced in the heatmap only. Every
entity pair keeps its best candidate regardless of threshold so stored runs
can be re-filtered at any correlation floor without recomputation.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entities import EntityTimeSeries


@dataclass(frozen=True, slots=True)
class DiscoveryConfig:
    max_lag_windows: int = 5
    min_correlation: float = 0.7
    min_overlap: int = 8
    use_absolute: bool = False

    def __post_init__(self) -> None:
        if self.max_lag_windows < 1:
            raise ValueError("max_lag_windows must be >= 1")
        if not 0.0 < self.min_correlation <= 1.0:
            raise ValueError("min_correlation must be in (0, 1]")
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")


@dataclass(frozen=True, slots=True)
class LagCorr:
    lag: int
    r: float | None
    n: int


@dataclass(frozen=True, slots=True)
class InfluenceEdge:
    source: str
    target: str
    lag: int
    r: float
    source_axis: int | None = None
    target_axis: int | None = None


@dataclass(frozen=True, slots=True)
class PairStats:
    a: str
    b: str
    best: InfluenceEdge | None
    best_abs: InfluenceEdge | None
    heat_r: float | None
    heat_lag: int | None
    heat_lead: str | None


@dataclass
class InfluenceGraph:
    entity_ids: list[str]
    edges: list[InfluenceEdge] = field(default_factory=list)
    pair_stats: dict[tuple[str, str], PairStats] = field(default_factory=dict)
    config: DiscoveryConfig = field(default_factory=DiscoveryConfig)


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Pearson correlation with pairwise deletion of missing entries.

    Undefined (None) when fewer than two aligned pairs remain or either
    side has zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("series must have equal length")
    mask = ~(np.isnan(x) | np.isnan(y))
    n = int(mask.sum())
    if n < 2:
        return None
    xs = x[mask]
    ys = y[mask]
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(dx @ dy / np.sqrt(sxx * syy))


def lagged_correlation(
    lead: np.ndarray, lag_series: np.ndarray, max_lag: int, min_overlap: int
) -> list[LagCorr]:
    """Correlation of lead[t] against lag_series[t + tau] for tau in 0..max_lag."""
    lead = np.asarray(lead, dtype=np.float64)
    lag_series = np.asarray(lag_series, dtype=np.float64)
    n = len(lead)
    out: list[LagCorr] = []
    for tau in range(max_lag + 1):
        if tau >= n:
            out.append(LagCorr(lag=tau, r=None, n=0))
            continue
        x = lead[: n - tau]
        y = lag_series[tau:]
        overlap = int((~(np.isnan(x) | np.isnan(y))).sum())
        r = pearson(x, y) if overlap >= max(2, min_overlap) else None
        out.append(LagCorr(lag=tau, r=r, n=overlap))
    return out


def series_matrix(series: EntityTimeSeries) -> np.ndarray:
    """Dense (n_windows, n_axes) matrix with NaN marking missing windows."""
    dim = max(series.dim, 1)
    rows = []
    for value in series.values:
        if value is None:
            rows.append(np.full(dim, np.nan))
        else:
            rows.append(np.asarray(value, dtype=np.float64).reshape(-1))
    return np.stack(rows) if rows else np.zeros((0, dim))


@dataclass(frozen=True, slots=True)
class _Candidate:
    source: str
    target: str
    lag: int
    r: float
    n: int
    source_axis: int | None
    target_axis: int | None
    direction_ab: bool


def _axis_label(series: EntityTimeSeries, axis: int) -> int | None:
    return None if series.scalar else axis


def pair_candidates(
    a: EntityTimeSeries, b: EntityTimeSeries, cfg: DiscoveryConfig
) -> list[_Candidate]:
    """Every (direction, lag, axis-pair) correlation row for one entity pair.

    Includes lag 0 rows (attributed to the a-to-b direction, which is a
    display convention only: lag-0 correlation is symmetric).
    """
    mat_a = series_matrix(a)
    mat_b = series_matrix(b)
    if mat_a.shape[0] != mat_b.shape[0]:
        raise ValueError("series must share the window grid")
    n = mat_a.shape[0]
    rows: list[_Candidate] = []
    floor = max(2, cfg.min_overlap)
    for source, target, s_mat, t_mat, ab in (
        (a, b, mat_a, mat_b, True),
        (b, a, mat_b, mat_a, False),
    ):
        for tau in range(0 if ab else 1, cfg.max_lag_windows + 1):
            if tau >= n:
                break
            for i in range(s_mat.shape[1]):
                x = s_mat[: n - tau, i]
                for j in range(t_mat.shape[1]):
                    y = t_mat[tau:, j]
                    overlap = int((~(np.isnan(x) | np.isnan(y))).sum())
                    r = pearson(x, y) if overlap >= floor else None
                    if r is None:
                        continue
                    rows.append(
                        _Candidate(
                            source=source.entity_id,
                            target=target.entity_id,
                            lag=tau,
                            r=r,
                            n=overlap,
                            source_axis=_axis_label(source, i),
                            target_axis=_axis_label(target, j),
                            direction_ab=ab,
                        )
                    )
    return rows


def pair_table(
    a: EntityTimeSeries, b: EntityTimeSeries, cfg: DiscoveryConfig
) -> list[dict]:
    """Full drill-down table for one pair, undefined correlations included."""
    mat_a = series_matrix(a)
    mat_b = series_matrix(b)
    n = mat_a.shape[0]
    floor = max(2, cfg.min_overlap)
    rows: list[dict] = []
    for source, target, s_mat, t_mat, ab in (
        (a, b, mat_a, mat_b, True),
        (b, a, mat_b, mat_a, False),
    ):
        for tau in range(0 if ab else 1, cfg.max_lag_windows + 1):
            for i in range(s_mat.shape[1]):
                for j in range(t_mat.shape[1]):
                    if tau >= n:
                        r, overlap = None, 0
                    else:
                        x = s_mat[: n - tau, i]
                        y = t_mat[tau:, j]
                        overlap = int((~(np.isnan(x) | np.isnan(y))).sum())
                        r = pearson(x, y) if overlap >= floor else None
                    rows.append(
                        {
                            "source": source.entity_id,
                            "target": target.entity_id,
                            "lag": tau,
                            "r": r,
                            "n": overlap,
                            "source_axis": _axis_label(source, i),
                            "target_axis": _axis_label(target, j),
                        }
                    )
    return rows


def _candidate_sort_key(c: _Candidate, absolute: bool) -> tuple:
    strength = abs(c.r) if absolute else c.r
    return (
        -strength,
        c.lag,
        c.source_axis if c.source_axis is not None else -1,
        c.target_axis if c.target_axis is not None else -1,
        0 if c.direction_ab else 1,
    )


def _best_directed(candidates: list[_Candidate], absolute: bool) -> InfluenceEdge | None:
    directed = [c for c in candidates if c.lag >= 1]
    if not directed:
        return None
    best = min(directed, key=lambda c: _candidate_sort_key(c, absolute))
    return InfluenceEdge(
        source=best.source,
        target=best.target,
        lag=best.lag,
        r=best.r,
        source_axis=best.source_axis,
        target_axis=best.target_axis,
    )


def _passes(edge: InfluenceEdge, r_min: float, absolute: bool) -> bool:
    return (abs(edge.r) if absolute else edge.r) >= r_min


def best_edge(
    a: EntityTimeSeries, b: EntityTimeSeries, cfg: DiscoveryConfig
) -> InfluenceEdge | None:
    """Single strongest threshold-passing directed edge between two entities."""
    candidates = pair_candidates(a, b, cfg)
    edge = _best_directed(candidates, cfg.use_absolute)
    if edge is not None and _passes(edge, cfg.min_correlation, cfg.use_absolute):
        return edge
    return None


def _pair_stats(
    a: EntityTimeSeries, b: EntityTimeSeries, cfg: DiscoveryConfig
) -> PairStats:
    candidates = pair_candidates(a, b, cfg)
    best = _best_directed(candidates, absolute=False)
    best_abs = _best_directed(candidates, absolute=True)
    heat_r = heat_lag = heat_lead = None
    if candidates:
        top = min(candidates, key=lambda c: _candidate_sort_key(c, absolute=False))
        heat_r = top.r
        heat_lag = top.lag
        heat_lead = top.source if top.lag >= 1 else None
    return PairStats(
        a=a.entity_id,
        b=b.entity_id,
        best=best,
        best_abs=best_abs,
        heat_r=heat_r,
        heat_lag=heat_lag,
        heat_lead=heat_lead,
    )


def edges_at_threshold(
    graph: InfluenceGraph, r_min: float, use_absolute: bool
) -> list[InfluenceEdge]:
    """Re-filter stored per-pair best candidates at a new threshold."""
    edges = []
    for key in sorted(graph.pair_stats):
        stats = graph.pair_stats[key]
        edge = stats.best_abs if use_absolute else stats.best
        if edge is not None and _passes(edge, r_min, use_absolute):
            edges.append(edge)
    return edges


def discover(
    series: list[EntityTimeSeries], cfg: DiscoveryConfig, jobs: int = 1
) -> InfluenceGraph:
    """All-pairs scan emitting the influence graph at the configured threshold."""
    if len(series) < 2:
        raise ValueError("discover needs at least 2 entities")
    ordered = sorted(series, key=lambda s: s.entity_id)
    ids = [s.entity_id for s in ordered]
    pairs = [
        (ordered[i], ordered[j])
        for i in range(len(ordered))
        for j in range(i + 1, len(ordered))
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            stats_list = list(pool.map(lambda p: _pair_stats(p[0], p[1], cfg), pairs))
    else:
        stats_list = [_pair_stats(a, b, cfg) for a, b in pairs]

    graph = InfluenceGraph(entity_ids=ids, config=cfg)
    for stats in stats_list:
        graph.pair_stats[(stats.a, stats.b)] = stats
    graph.edges = edges_at_threshold(graph, cfg.min_correlation, cfg.use_absolute)
    return graph


# serialization


def _edge_dict(edge: InfluenceEdge | None) -> dict | None:
    if edge is None:
        return None
    return {
        "source": edge.source,
        "target": edge.target,
        "lag": edge.lag,
        "r": float(f"{edge.r:.9g}"),
        "source_axis": edge.source_axis,
        "target_axis": edge.target_axis,
    }


def influence_to_bytes(graph: InfluenceGraph) -> bytes:
    ids = graph.entity_ids
    index = {eid: i for i, eid in enumerate(ids)}
    size = len(ids)
    heat_r: list[list[float | None]] = [[None] * size for _ in range(size)]
    heat_lag: list[list[int | None]] = [[None] * size for _ in range(size)]
    heat_lead: list[list[str | None]] = [[None] * size for _ in range(size)]
    for i in range(size):
        heat_r[i][i] = 1.0
        heat_lag[i][i] = 0
    for (a, b), stats in graph.pair_stats.items():
        i, j = index[a], index[b]
        value = None if stats.heat_r is None else float(f"{stats.heat_r:.9g}")
        for r, c in ((i, j), (j, i)):
            heat_r[r][c] = value
            heat_lag[r][c] = stats.heat_lag
            heat_lead[r][c] = stats.heat_lead
    payload = {
        "entities": ids,
        "config": {
            "max_lag_windows": graph.config.max_lag_windows,
            "min_correlation": graph.config.min_correlation,
            "min_overlap": graph.config.min_overlap,
            "use_absolute": graph.config.use_absolute,
        },
        "edges": [_edge_dict(e) for e in graph.edges],
        "heatmap": {"r": heat_r, "lag": heat_lag, "lead": heat_lead},
        "pair_stats": [
            {
                "a": stats.a,
                "b": stats.b,
                "best": _edge_dict(stats.best),
                "best_abs": _edge_dict(stats.best_abs),
                "heat_r": None if stats.heat_r is None else float(f"{stats.heat_r:.9g}"),
                "heat_lag": stats.heat_lag,
                "heat_lead": stats.heat_lead,
            }
            for (_, _), stats in sorted(graph.pair_stats.items())
        ],
    }
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _edge_from_dict(row: dict | None) -> InfluenceEdge | None:
    if row is None:
        return None
    return InfluenceEdge(
        source=row["source"],
        target=row["target"],
        lag=row["lag"],
        r=row["r"],
        source_axis=row.get("source_axis"),
        target_axis=row.get("target_axis"),
    )


def influence_from_bytes(blob: bytes) -> InfluenceGraph:
    payload = json.loads(blob.decode("utf-8"))
    cfg = DiscoveryConfig(
        max_lag_windows=payload["config"]["max_lag_windows"],
        min_correlation=payload["config"]["min_correlation"],
        min_overlap=payload["config"]["min_overlap"],
        use_absolute=payload["config"]["use_absolute"],
    )
    graph = InfluenceGraph(entity_ids=payload["entities"], config=cfg)
    graph.edges = [_edge_from_dict(row) for row in payload["edges"] if row]
    for row in payload["pair_stats"]:
        graph.pair_stats[(row["a"], row["b"])] = PairStats(
            a=row["a"],
            b=row["b"],
            best=_edge_from_dict(row["best"]),
            best_abs=_edge_from_dict(row["best_abs"]),
            heat_r=row["heat_r"],
            heat_lag=row["heat_lag"],
            heat_lead=row["heat_lead"],
        )
    return graph


def influence_to_dot(graph: InfluenceGraph, labels: dict[str, str] | None = None) -> str:
    """DOT text for external graph viewers."""
    labels = labels or {}
    lines = ["digraph influence {"]
    for eid in graph.entity_ids:
        label = labels.get(eid, eid).replace('"', "'")
        lines.append(f'  "{eid}" [label="{label}"];')
    for edge in graph.edges:
        lines.append(
            f'  "{edge.source}" -> "{edge.target}" [label="lag={edge.lag} r={edge.r:.3f}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
