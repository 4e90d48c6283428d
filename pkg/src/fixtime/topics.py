"""Document clustering into topics with keyword extraction.

Topics come from k-means (k-means++ seeding, max 300 iterations, centroid
shift tolerance 1e-6) run over a candidate range of k; the k with the best
mean silhouette coefficient wins, ties going to the smaller k. Keywords are
ranked by class-based TF-IDF: each topic's documents are concatenated into
one class document and

    score(t, c) = tf(t, c) * ln(1 + A / f(t))

where A is the mean token count per class and f(t) the token's total
frequency across all classes. Every document is assigned to its nearest
centroid; there is no outlier class.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fixtime.errors import DimensionError, TooFewDocuments
from fixtime.textproc import DocVector, TokenizedDoc

__all__ = [
    "TopicModel",
    "TopicAssignment",
    "fit_topics",
    "topic_keywords",
    "assign_topic",
    "default_k_range",
]

MAX_ITER = 300
SHIFT_TOL = 1e-6


@dataclass(frozen=True)
class TopicAssignment:
    issue_key: str
    topic_id: int
    distance: float


@dataclass
class TopicModel:
    """Fitted topic clustering over document vectors."""

    k: int
    centroids: np.ndarray  # (k, d)
    seed: int
    selection_trace: list[tuple[int, float]]
    sizes: list[int]
    inertia: float
    keywords: list[list[tuple[str, float]]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def report(self) -> dict:
        """Topic report in the export schema."""
        topics = []
        for topic_id in range(self.k):
            words = self.keywords[topic_id] if topic_id < len(self.keywords) else []
            topics.append(
                {
                    "id": topic_id,
                    "size": self.sizes[topic_id],
                    "keywords": [[token, score] for token, score in words],
                }
            )
        return {"k": self.k, "topics": topics}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "seed": self.seed,
            "selection_trace": [[k, s] for k, s in self.selection_trace],
            "sizes": list(self.sizes),
            "inertia": self.inertia,
            "keywords": [[[t, s] for t, s in words] for words in self.keywords],
        }

    @classmethod
    def from_dict(cls, data: dict) -> TopicModel:
        return cls(
            k=data["k"],
            centroids=np.asarray(data["centroids"], dtype=np.float64),
            seed=data["seed"],
            selection_trace=[(int(k), float(s)) for k, s in data["selection_trace"]],
            sizes=[int(s) for s in data["sizes"]],
            inertia=float(data["inertia"]),
            keywords=[[(t, float(s)) for t, s in words] for words in data["keywords"]],
        )


def default_k_range(n_docs: int) -> tuple[int, int]:
    """Candidate topic counts scaled to corpus size: [5, min(30, N/200 + 5)]."""
    return 5, min(30, n_docs // 200 + 5)


def _kmeans_pp_init(matrix: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = matrix.shape[0]
    centroids = np.empty((k, matrix.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = matrix[first]
    closest = np.sum((matrix - centroids[0]) ** 2, axis=1)
    for idx in range(1, k):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            choice = int(rng.choice(n, p=probs))
        else:
            choice = int(rng.integers(n))
        centroids[idx] = matrix[choice]
        closest = np.minimum(closest, np.sum((matrix - centroids[idx]) ** 2, axis=1))
    return centroids


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via the Gram identity (O(nkd) memory-free)."""
    p_sq = np.einsum("nd,nd->n", points, points)
    c_sq = np.einsum("kd,kd->k", centers, centers)
    sq = p_sq[:, None] + c_sq[None, :] - 2.0 * (points @ centers.T)
    return np.maximum(sq, 0.0)


def _lloyd(
    matrix: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations; returns (centroids, labels, inertia)."""
    k = centroids.shape[0]
    prev_inertia = np.inf
    labels = np.zeros(matrix.shape[0], dtype=np.int64)
    for _ in range(MAX_ITER):
        sq = _sq_distances(matrix, centroids)
        labels = np.argmin(sq, axis=1)
        inertia = float(sq[np.arange(matrix.shape[0]), labels].sum())
        assert inertia <= prev_inertia + 1e-9 * max(1.0, abs(prev_inertia))
        prev_inertia = inertia

        new_centroids = centroids.copy()
        for topic_id in range(k):
            members = labels == topic_id
            if members.any():
                new_centroids[topic_id] = matrix[members].mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from its centroid.
                worst = int(np.argmax(sq[np.arange(matrix.shape[0]), labels]))
                new_centroids[topic_id] = matrix[worst]
        shift = float(np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1)).max())
        centroids = new_centroids
        if shift < SHIFT_TOL:
            break
    sq = _sq_distances(matrix, centroids)
    labels = np.argmin(sq, axis=1)
    inertia = float(sq[np.arange(matrix.shape[0]), labels].sum())
    return centroids, labels, inertia


def _mean_silhouette(dist: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient from a precomputed distance matrix.

    Singleton-cluster samples score 0, as do degenerate (all-zero distance)
    configurations and single-cluster labelings.
    """
    n = dist.shape[0]
    cluster_ids = np.unique(labels)
    if cluster_ids.size < 2:
        return 0.0
    sizes = {int(c): int(np.sum(labels == c)) for c in cluster_ids}
    scores = np.zeros(n, dtype=np.float64)
    sums = np.stack([dist[:, labels == c].sum(axis=1) for c in cluster_ids], axis=1)
    for i in range(n):
        own_pos = int(np.searchsorted(cluster_ids, labels[i]))
        own_size = sizes[int(labels[i])]
        if own_size <= 1:
            continue
        a = sums[i, own_pos] / (own_size - 1)
        b = min(
            sums[i, pos] / sizes[int(c)]
            for pos, c in enumerate(cluster_ids)
            if pos != own_pos
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def fit_topics(
    vectors: Sequence[DocVector],
    k_range: tuple[int, int],
    seed: int,
) -> tuple[TopicModel, list[TopicAssignment]]:
    """Cluster document vectors, selecting k by mean silhouette.

    Each candidate k runs with its own seed stream derived from (seed, k),
    so results are deterministic and candidates are order-independent.
    """
    k_min, k_max = k_range
    if k_min < 2:
        raise ValueError("k_min must be >= 2")
    n = len(vectors)
    if n < k_min + 1:
        raise TooFewDocuments(f"{n} docs < k_min + 1 = {k_min + 1}")
    matrix = np.stack([v.values for v in vectors])
    k_max = min(k_max, n)

    dist = None
    best: tuple[float, int, np.ndarray, np.ndarray, float] | None = None
    trace: list[tuple[int, float]] = []
    for k in range(k_min, k_max + 1):
        rng = np.random.default_rng([seed, k])
        centroids, labels, inertia = _lloyd(matrix, _kmeans_pp_init(matrix, k, rng))
        if dist is None:
            sq = _sq_distances(matrix, matrix)
            dist = np.sqrt(np.maximum(sq, 0.0))
        score = _mean_silhouette(dist, labels)
        trace.append((k, score))
        if best is None or score > best[0]:
            best = (score, k, centroids, labels, inertia)

    assert best is not None
    _, k, centroids, labels, inertia = best
    sizes = [int(np.sum(labels == t)) for t in range(k)]
    model = TopicModel(
        k=k,
        centroids=centroids,
        seed=seed,
        selection_trace=trace,
        sizes=sizes,
        inertia=inertia,
    )
    assignments = [
        TopicAssignment(
            issue_key=vectors[i].issue_key,
            topic_id=int(labels[i]),
            distance=float(np.linalg.norm(matrix[i] - centroids[labels[i]])),
        )
        for i in range(n)
    ]
    return model, assignments


def topic_keywords(
    model: TopicModel,
    docs: Sequence[TokenizedDoc],
    assignments: Sequence[TopicAssignment],
    top_n: int = 10,
) -> list[list[tuple[str, float]]]:
    """Rank keywords per topic by class-based TF-IDF; empty topics give []."""
    topic_of = {a.issue_key: a.topic_id for a in assignments}
    class_tf: list[Counter[str]] = [Counter() for _ in range(model.k)]
    for doc in docs:
        if doc.issue_key not in topic_of:
            raise ValueError(f"no topic assignment for doc {doc.issue_key!r}")
        class_tf[topic_of[doc.issue_key]].update(doc.tokens)

    total_tokens = sum(sum(tf.values()) for tf in class_tf)
    mean_class_tokens = total_tokens / model.k if model.k else 0.0
    corpus_freq: Counter[str] = Counter()
    for tf in class_tf:
        corpus_freq.update(tf)

    ranked: list[list[tuple[str, float]]] = []
    for tf in class_tf:
        scored = [
            (token, count * float(np.log(1.0 + mean_class_tokens / corpus_freq[token])))
            for token, count in tf.items()
        ]
        scored.sort(key=lambda ts: (-ts[1], ts[0]))
        ranked.append(scored[: max(top_n, 0)])
    return ranked


def assign_topic(vector: DocVector, model: TopicModel) -> TopicAssignment:
    """Nearest centroid by Euclidean distance; ties go to the lowest topic id."""
    values = np.asarray(vector.values, dtype=np.float64)
    if values.shape != (model.dim,):
        raise DimensionError(f"expected dimension {model.dim}, got {values.shape}")
    distances = np.linalg.norm(model.centroids - values, axis=1)
    topic_id = int(np.argmin(distances))
    return TopicAssignment(
        issue_key=vector.issue_key, topic_id=topic_id, distance=float(distances[topic_id])
    )
