"""Windowed nonnegative ideology embeddings over the interaction graph.

Each popular node owns free variational parameters: a raw mean m and a log
variance s, both d-dimensional. A latent sample is

    z = max(relu(m) + exp(s / 2) * eps, 0),   eps ~ N(0, I)

so every embedding lives in the positive quadrant by construction. Edges are
reconstructed through a logistic dot-product decoder over the observed edges
plus sampled per-edge corruptions, with the positive class upweighted by the
negative ratio (nonnegative embeddings cannot push a dot product below zero,
so unbalanced negative pressure admits total collapse as the optimum). The
objective adds a KL pull toward the standard normal and a penalty on
off-diagonal entries of the Gram matrix of column-normalized means, which
drives distinct latent axes toward zero overlap. Gradients are derived by
hand and checked against finite differences in the test suite; the optimizer
is Adam projected onto means above a tiny positive floor, since a mean
pushed through zero would sit permanently dead behind the relu.

Nodes outside the popular set inherit the average of their embedded
neighbors through synchronous sweeps; nodes unreachable from any trained
node stay missing.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum

import numpy as np

from .graph import BipartiteInteractionGraph, NodeId, NodeKind, TimeWindow, window_slice


# means are projected back above this floor after each optimizer step
MEAN_FLOOR = 1e-6

# the axis-overlap penalty competes against a reconstruction term summed over
# samples, so its weight must grow with the sample count to stay relevant;
# this fraction calibrates ortho_weight=1 to a few percent of reconstruction
ORTHO_SAMPLE_FRACTION = 0.02


class Provenance(str, Enum):
    TRAINED = "trained"
    PROPAGATED = "propagated"
    MISSING = "missing"


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class EmbedConfig:
    latent_dim: int = 2
    epochs: int = 300
    learning_rate: float = 0.05
    kl_weight: float = 0.1
    ortho_weight: float = 1.0
    negative_ratio: int = 5
    popular_user_count: int = 2000
    popular_assertion_count: int = 2000
    restarts: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.latent_dim < 2:
            raise ValueError("latent_dim must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.kl_weight < 0 or self.ortho_weight < 0:
            raise ValueError("loss weights must be nonnegative")
        if not (math.isfinite(self.kl_weight) and math.isfinite(self.ortho_weight)):
            raise ValueError("loss weights must be finite")
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")
        if self.popular_user_count < 1 or self.popular_assertion_count < 1:
            raise ValueError("popular counts must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[NodeId, np.ndarray] = field(default_factory=dict)
    provenance: dict[NodeId, Provenance] = field(default_factory=dict)

    def set(self, node: NodeId, vector: np.ndarray, provenance: Provenance) -> None:
        self.vectors[node] = np.asarray(vector, dtype=np.float64)
        self.provenance[node] = provenance

    def get(self, node: NodeId) -> np.ndarray | None:
        return self.vectors.get(node)

    def provenance_of(self, node: NodeId) -> Provenance:
        return self.provenance.get(node, Provenance.MISSING)

    def __len__(self) -> int:
        return len(self.vectors)

    def sorted_items(self) -> list[tuple[NodeId, np.ndarray]]:
        return sorted(self.vectors.items(), key=lambda kv: (kv[0].kind.value, kv[0].key))

    def permute_axes(self, permutation: tuple[int, ...]) -> "EmbeddingTable":
        perm = list(permutation)
        out = EmbeddingTable(dim=self.dim)
        for node, vec in self.vectors.items():
            out.set(node, vec[perm], self.provenance[node])
        return out


@dataclass
class EmbeddingSeriesTable:
    windows: list[TimeWindow] = field(default_factory=list)
    tables: list[EmbeddingTable] = field(default_factory=list)

    def append(self, window: TimeWindow, table: EmbeddingTable) -> None:
        if self.windows and window.start <= self.windows[-1].start:
            raise ValueError("windows must be strictly increasing by start date")
        self.windows.append(window)
        self.tables.append(table)


@dataclass
class TrainReport:
    initial_loss: float
    final_loss: float
    terms: dict[str, float]
    epochs_run: int
    trajectory: list[float] = field(default_factory=list)


@dataclass
class AlignInfo:
    permutation: tuple[int, ...]
    no_shared_nodes: bool = False


def select_popular(
    graph: BipartiteInteractionGraph, user_count: int, assertion_count: int
) -> set[NodeId]:
    """Highest-degree users and assertions, ties broken by node key."""
    if user_count < 1 or assertion_count < 1:
        raise ValueError("popular counts must be >= 1")
    degrees = graph.degrees()
    users = sorted(graph.users, key=lambda n: (-degrees[n], n.key))
    assertions = sorted(graph.assertions, key=lambda n: (-degrees[n], n.key))
    return set(users[:user_count]) | set(assertions[:assertion_count])


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loss_and_grads(
    m: np.ndarray,
    s: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    eps: np.ndarray,
    kl_weight: float,
    ortho_weight: float,
    positive_weight: float = 1.0,
) -> tuple[float, dict[str, float], np.ndarray, np.ndarray]:
    """Full loss and its analytic gradients for fixed noise and negatives.

    positives/negatives are (k, 2) integer arrays of (row_u, row_a) indices
    into the parameter matrices. positive_weight rebalances the classes when
    negatives outnumber observed edges; without it the reconstruction term
    of a sparse graph is minimized by collapsing every mean to zero.
    Returns (loss, per-term values, dm, ds).
    """
    n, d = m.shape
    mu = np.maximum(m, 0.0)
    sigma = np.exp(0.5 * s)
    z_pre = mu + sigma * eps
    z = np.maximum(z_pre, 0.0)

    relu_mask = (m > 0.0).astype(np.float64)
    clamp_mask = (z_pre > 0.0).astype(np.float64)

    def pair_scores(pairs: np.ndarray) -> np.ndarray:
        if len(pairs) == 0:
            return np.zeros(0)
        return np.einsum("ij,ij->i", z[pairs[:, 0]], z[pairs[:, 1]])

    x_pos = pair_scores(positives)
    x_neg = pair_scores(negatives)
    recon = float(
        positive_weight * np.sum(_softplus(-x_pos)) + np.sum(_softplus(x_neg))
    )

    kl = 0.5 * float(np.sum(mu * mu + sigma * sigma - s - 1.0))

    col_norms = np.linalg.norm(mu, axis=0)
    safe_norms = np.where(col_norms == 0.0, 1.0, col_norms)
    z_hat = mu / safe_norms
    gram = z_hat.T @ z_hat
    off_diag = np.ones((d, d)) - np.eye(d)
    ortho = float(np.sum((gram * off_diag) ** 2))

    loss = recon + kl_weight * kl + ortho_weight * ortho

    # reconstruction gradient, scattered back through the sampled latents
    g_pos = positive_weight * (_sigmoid(x_pos) - 1.0)
    g_neg = _sigmoid(x_neg)
    gz = np.zeros_like(z)
    if len(positives) or len(negatives):
        rows = np.concatenate(
            [positives[:, 0], positives[:, 1], negatives[:, 0], negatives[:, 1]]
        )
        partners = np.concatenate(
            [positives[:, 1], positives[:, 0], negatives[:, 1], negatives[:, 0]]
        )
        coeff = np.concatenate([g_pos, g_pos, g_neg, g_neg])
        for k in range(d):
            gz[:, k] = np.bincount(rows, weights=coeff * z[partners, k], minlength=n)
    g_zpre = gz * clamp_mask
    dm = g_zpre * relu_mask
    ds = g_zpre * 0.5 * sigma * eps

    # KL gradient
    dm += kl_weight * mu * relu_mask
    ds += kl_weight * 0.5 * (sigma * sigma - 1.0)

    # orthogonality gradient through column normalization
    if ortho_weight > 0.0:
        g_zhat = 4.0 * z_hat @ (gram * off_diag)
        proj = np.sum(z_hat * g_zhat, axis=0)
        g_mu_ortho = (g_zhat - z_hat * proj) / safe_norms
        dm += ortho_weight * g_mu_ortho * relu_mask

    terms = {"reconstruction": recon, "kl": kl, "orthogonality": ortho}
    return loss, terms, dm, ds


def _sample_negatives(
    rng: np.random.Generator,
    positives: np.ndarray,
    ratio: int,
    existing: set[int],
    encode_base: int,
) -> np.ndarray:
    """Per-edge corruption: each edge spawns ratio non-edges by replacing one
    endpoint with the matching endpoint of a random edge.

    Drawing replacements from edges makes a node's negative pressure scale
    with its degree, the same way its positive signal does; uniform node
    sampling instead starves low-degree nodes and collapses their means.
    """
    if len(positives) == 0 or ratio == 0:
        return np.zeros((0, 2), dtype=np.int64)
    count = len(positives) * ratio
    base = np.tile(positives, (ratio, 1))
    donor = positives[rng.integers(len(positives), size=count)]
    corrupt_user = rng.random(count) < 0.5
    u = np.where(corrupt_user, donor[:, 0], base[:, 0])
    a = np.where(corrupt_user, base[:, 1], donor[:, 1])
    encoded = u * encode_base + a
    keep = np.fromiter((e not in existing for e in encoded), dtype=bool, count=count)
    return np.stack([u[keep], a[keep]], axis=1)


def _init_means(
    rng: np.random.Generator,
    n: int,
    d: int,
    index: dict[NodeId, int],
    warm_start: EmbeddingTable | None,
) -> np.ndarray:
    # every node starts with one dominant axis so both axes carry real mass
    # from the outset; a migration out of an empty axis has nothing to grow
    # from and stalls
    m = rng.uniform(0.05, 0.15, size=(n, d))
    dominant = rng.integers(d, size=n)
    m[np.arange(n), dominant] = rng.uniform(0.3, 0.6, size=n)
    if warm_start is not None:
        for node, i in index.items():
            vec = warm_start.get(node)
            if vec is not None:
                m[i] = vec
    return m


def train_window_embedding(
    graph: BipartiteInteractionGraph,
    cfg: EmbedConfig,
    warm_start: EmbeddingTable | None = None,
) -> tuple[EmbeddingTable, TrainReport]:
    """Train embeddings for the popular nodes of one window graph.

    Runs cfg.restarts independent Adam descents with a linearly decaying
    step size, tail-averages the means of each descent over its final
    quarter, and keeps the candidate with the lowest deterministic
    evaluation loss (zero noise, one shared negative sample). The initial
    parameters always compete as a candidate, so the reported final loss
    never exceeds the initial one.
    """
    popular = select_popular(graph, cfg.popular_user_count, cfg.popular_assertion_count)
    nodes = sorted(popular, key=lambda node: (node.kind.value, node.key))
    if not nodes:
        raise EmbeddingError("empty popular subgraph: no nodes to train")
    index = {node: i for i, node in enumerate(nodes)}
    n, d = len(nodes), cfg.latent_dim
    if warm_start is not None and warm_start.dim != d:
        raise EmbeddingError(
            f"warm start dimension {warm_start.dim} incompatible with latent_dim {d}"
        )

    positives = np.array(
        [
            (index[e.user], index[e.assertion])
            for e in graph.edges
            if e.user in popular and e.assertion in popular
        ],
        dtype=np.int64,
    ).reshape(-1, 2)
    existing = {int(u) * n + int(a) for u, a in positives}
    positive_weight = float(cfg.negative_ratio)
    recon_samples = max(1, len(positives) * (1 + cfg.negative_ratio))
    ortho_weight = cfg.ortho_weight * ORTHO_SAMPLE_FRACTION * recon_samples

    root = np.random.SeedSequence(abs(int(cfg.seed)))
    streams = root.spawn(cfg.restarts + 1)
    eval_rng = np.random.default_rng(streams[0])
    eval_negatives = _sample_negatives(eval_rng, positives, cfg.negative_ratio, existing, n)
    zero_eps = np.zeros((n, d))

    def eval_loss(mm: np.ndarray, ss: np.ndarray) -> tuple[float, dict[str, float]]:
        loss, terms, _, _ = loss_and_grads(
            mm, ss, positives, eval_negatives, zero_eps,
            cfg.kl_weight, ortho_weight, positive_weight,
        )
        return loss, terms

    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    tail_start = (3 * cfg.epochs) // 4

    initial_loss: float | None = None
    best_loss = math.inf
    best_terms: dict[str, float] = {}
    best_m: np.ndarray | None = None
    best_trajectory: list[float] = []

    # restart 0 adopts the warm start; later restarts explore fresh inits so
    # a degenerate warm state cannot trap every candidate. The warm init
    # itself always stays in the candidate set via the restart-0 evaluation.
    effective_restarts = 1 if cfg.epochs == 0 else cfg.restarts
    for restart, stream in enumerate(streams[1 : 1 + effective_restarts]):
        rng = np.random.default_rng(stream)
        m = _init_means(rng, n, d, index, warm_start if restart == 0 else None)
        s = np.full((n, d), -3.0)
        if restart == 0:
            initial_loss, initial_terms = eval_loss(m, s)
            if initial_loss < best_loss:
                best_loss, best_terms = initial_loss, initial_terms
                best_m = m.copy()

        vm = np.zeros_like(m)
        wm = np.zeros_like(m)
        vs = np.zeros_like(s)
        ws = np.zeros_like(s)
        tail_sum = np.zeros_like(m)
        tail_count = 0
        trajectory: list[float] = []

        for epoch in range(cfg.epochs):
            lr = cfg.learning_rate * (1.0 - 0.9 * epoch / cfg.epochs)
            eps = rng.standard_normal((n, d))
            negatives = _sample_negatives(rng, positives, cfg.negative_ratio, existing, n)
            loss, terms, dm, ds = loss_and_grads(
                m, s, positives, negatives, eps,
                cfg.kl_weight, ortho_weight, positive_weight,
            )
            if not math.isfinite(loss):
                raise EmbeddingError(
                    f"non-finite loss at epoch {epoch} (restart {restart}): terms={terms}"
                )
            trajectory.append(loss)

            t = epoch + 1
            for param, grad, v, w in ((m, dm, vm, wm), (s, ds, vs, ws)):
                v *= beta1
                v += (1 - beta1) * grad
                w *= beta2
                w += (1 - beta2) * grad * grad
                v_hat = v / (1 - beta1**t)
                w_hat = w / (1 - beta2**t)
                param -= lr * v_hat / (np.sqrt(w_hat) + adam_eps)
            # project means back to a small positive floor: a coordinate
            # pushed through zero would otherwise go dead behind the relu
            np.maximum(m, MEAN_FLOOR, out=m)
            if epoch >= tail_start:
                tail_sum += m
                tail_count += 1

        candidate = tail_sum / tail_count if tail_count else m
        candidate_loss, candidate_terms = eval_loss(candidate, s)
        if candidate_loss < best_loss:
            best_loss, best_terms = candidate_loss, candidate_terms
            best_m = candidate.copy()
            best_trajectory = trajectory

    table = EmbeddingTable(dim=d)
    best_mu = np.maximum(best_m, 0.0)
    for node, i in index.items():
        table.set(node, best_mu[i], Provenance.TRAINED)
    report = TrainReport(
        initial_loss=float(initial_loss),
        final_loss=float(best_loss),
        terms=best_terms,
        epochs_run=cfg.epochs,
        trajectory=best_trajectory,
    )
    return table, report


def propagate_embeddings(
    trained: EmbeddingTable, graph: BipartiteInteractionGraph
) -> EmbeddingTable:
    """Spread embeddings outward from trained nodes in synchronous sweeps.

    In each sweep every node still without an embedding whose neighbors
    include at least one embedded node takes the mean of those neighbors'
    vectors, computed against the state at the start of the sweep. Values
    are assigned once and never revised; trained values are never touched.
    """
    adjacency = graph.neighbors()
    out = EmbeddingTable(dim=trained.dim)
    for node in graph.users | graph.assertions:
        vec = trained.get(node)
        if vec is not None:
            out.set(node, vec, trained.provenance_of(node))

    # neighbor averages run in sorted order so the float result does not
    # depend on set iteration order (which varies with hash salting)
    sorted_adjacency = {
        node: sorted(neighbors, key=lambda n: (n.kind.value, n.key))
        for node, neighbors in adjacency.items()
    }
    pending = {node for node in adjacency if node not in out.vectors}
    while pending:
        assignments: dict[NodeId, np.ndarray] = {}
        for node in pending:
            embedded = [
                out.vectors[nb] for nb in sorted_adjacency[node] if nb in out.vectors
            ]
            if embedded:
                assignments[node] = np.mean(embedded, axis=0)
        if not assignments:
            break
        for node, vec in assignments.items():
            out.set(node, vec, Provenance.PROPAGATED)
            pending.discard(node)
    return out


def align_axes(prev: EmbeddingTable, cur: EmbeddingTable) -> tuple[EmbeddingTable, AlignInfo]:
    """Permute cur's axes to best match prev on their shared nodes.

    The score of a permutation is the sum over axes of the cosine
    similarity between the per-axis coordinate vectors of shared nodes.
    Exhaustive search; latent dimensions stay small.
    """
    if prev.dim != cur.dim:
        raise ValueError("tables must share the latent dimension")
    d = cur.dim
    shared = sorted(
        set(prev.vectors) & set(cur.vectors), key=lambda node: (node.kind.value, node.key)
    )
    if not shared:
        return cur, AlignInfo(permutation=tuple(range(d)), no_shared_nodes=True)

    prev_mat = np.stack([prev.vectors[node] for node in shared])
    cur_mat = np.stack([cur.vectors[node] for node in shared])

    def cosine(a: np.ndarray, b: np.ndarray) -> float:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b / (na * nb))

    best_perm = tuple(range(d))
    best_score = -math.inf
    for perm in itertools.permutations(range(d)):
        score = sum(cosine(prev_mat[:, j], cur_mat[:, perm[j]]) for j in range(d))
        if score > best_score:
            best_score = score
            best_perm = perm
    if best_perm == tuple(range(d)):
        return cur, AlignInfo(permutation=best_perm)
    return cur.permute_axes(best_perm), AlignInfo(permutation=best_perm)


def build_embedding_series(
    graph: BipartiteInteractionGraph,
    windows: list[TimeWindow],
    cfg: EmbedConfig,
) -> tuple[EmbeddingSeriesTable, list[TrainReport]]:
    """Embed every window, warm-starting and axis-aligning along the way."""
    series = EmbeddingSeriesTable()
    reports: list[TrainReport] = []
    previous: EmbeddingTable | None = None
    for window in windows:
        sliced = window_slice(graph, window)
        if not sliced.edges:
            series.append(window, EmbeddingTable(dim=cfg.latent_dim))
            reports.append(TrainReport(0.0, 0.0, {}, 0))
            continue
        window_cfg = replace(cfg, seed=(cfg.seed * 1_000_003 + window.index) % (1 << 62))
        try:
            trained, report = train_window_embedding(sliced, window_cfg, warm_start=previous)
            full = propagate_embeddings(trained, sliced)
            if previous is not None:
                full, _ = align_axes(previous, full)
        except EmbeddingError as exc:
            raise EmbeddingError(f"window {window.index}: {exc}") from exc
        series.append(window, full)
        reports.append(report)
        previous = full
    return series, reports


def series_table_to_bytes(series: EmbeddingSeriesTable) -> bytes:
    """Deterministic dump: sorted rows, coordinates at 9 significant digits."""
    windows = []
    for window, table in zip(series.windows, series.tables):
        rows = [
            [
                node.kind.value,
                node.key,
                table.provenance[node].value,
                [float(f"{c:.9g}") for c in vec],
            ]
            for node, vec in table.sorted_items()
        ]
        windows.append(
            {
                "index": window.index,
                "start": window.start.isoformat(),
                "length_days": window.length_days,
                "dim": table.dim,
                "rows": rows,
            }
        )
    payload = {"windows": windows}
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()


def series_table_from_bytes(blob: bytes) -> EmbeddingSeriesTable:
    payload = json.loads(blob.decode("utf-8"))
    series = EmbeddingSeriesTable()
    for entry in payload["windows"]:
        window = TimeWindow(
            start=date.fromisoformat(entry["start"]),
            length_days=entry["length_days"],
            index=entry["index"],
        )
        table = EmbeddingTable(dim=entry["dim"])
        for kind, key, provenance, coords in entry["rows"]:
            table.set(
                NodeId(NodeKind(kind), key),
                np.asarray(coords, dtype=np.float64),
                Provenance(provenance),
            )
        series.append(window, table)
    return series
