"""Seven-view feature construction and the stacked resolution-time model.

Each labeled issue is described by seven independent feature views:

* ``priority`` / ``issue_type`` / ``component`` / ``label`` — one-hot over
  the distinct normalized training values (component/label use the primary,
  i.e. first-listed, value); unseen values encode to all zeros;
* ``assignee`` — historical statistics of the issue's assignee computed on
  training rows only: [count, mean days, median days, four category
  proportions, component-match flag]; unknown assignee → zeros;
* ``topics`` — one-hot nearest topic plus centroid distance;
* ``similarity`` — cosine-similarity-weighted category histogram over the
  k nearest training documents plus max/mean similarity.

A base classifier per view emits 4-class probabilities; a logistic
meta-learner trained on out-of-fold base probabilities combines them into
the final prediction. Everything fitted here consumes training rows only,
and the meta-learner's inputs are kept on the Prediction so the final
probabilities can be reproduced from the reported per-view vectors.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from fixtime.config import VIEW_NAMES, ProjectConfig
from fixtime.errors import BundleError, OverrideError, StratificationError
from fixtime.ingest import RawIssue
from fixtime.learners import (
    Dataset,
    ForestModel,
    LogRegModel,
    TreeModel,
    model_from_dict,
    model_to_dict,
    train_forest,
    train_logreg,
    train_tree,
)
from fixtime.lifecycle import (
    NUM_CATEGORIES,
    LabeledIssue,
    ProjectCorpus,
    ResolutionCategory,
)
from fixtime.textproc import (
    DocVector,
    LsaReducer,
    Vectorizer,
    clean_text,
    default_stopwords,
    fit_vectorizer,
    load_embeddings,
    reduce_dimensionality,
    vectorize_matrix,
)
from fixtime.topics import TopicModel, assign_topic, default_k_range, fit_topics, topic_keywords

__all__ = [
    "CategoryEncoder",
    "AssigneeProfile",
    "SimilarityIndex",
    "FeatureExtractor",
    "FeatureView",
    "Prediction",
    "Explanation",
    "WhatIfResult",
    "StackedModel",
    "build_assignee_profiles",
    "build_views",
    "fit_extractor",
    "stratified_kfold",
    "train_stacked",
    "train_pipeline",
    "predict",
    "explain",
    "whatif",
    "OVERRIDABLE_FIELDS",
]

MODEL_VERSION = 1

OVERRIDABLE_FIELDS = frozenset({"priority", "issue_type", "components", "labels", "assignee"})

ASSIGNEE_FEATURE_DIM = 8
SIMILARITY_FEATURE_DIM = 6


def _normalize(value: str | None) -> str:
    return (value or "").strip().lower()


@dataclass
class CategoryEncoder:
    """One-hot over the sorted distinct normalized values seen in training."""

    values: tuple[str, ...]

    def __post_init__(self) -> None:
        self._index = {v: i for i, v in enumerate(self.values)}

    @property
    def dim(self) -> int:
        return len(self.values)

    @classmethod
    def fit(cls, raw_values: Iterable[str | None]) -> CategoryEncoder:
        vocab = sorted({n for n in (_normalize(v) for v in raw_values) if n})
        return cls(values=tuple(vocab))

    def encode(self, value: str | None) -> np.ndarray:
        row = np.zeros(self.dim, dtype=np.float64)
        hot = self._index.get(_normalize(value))
        if hot is not None:
            row[hot] = 1.0
        return row

    def to_dict(self) -> dict:
        return {"values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> CategoryEncoder:
        return cls(values=tuple(data["values"]))


@dataclass
class AssigneeProfile:
    """Training-time resolution history of one assignee."""

    assignee: str
    count: int
    mean_days: float
    median_days: float
    histogram: tuple[int, int, int, int]  # per resolution category
    components: dict[str, int]  # primary component -> issue count

    def features(self, primary_component: str | None) -> np.ndarray:
        proportions = np.asarray(self.histogram, dtype=np.float64) / self.count
        match = 1.0 if _normalize(primary_component) in self.components else 0.0
        return np.concatenate(
            [[float(self.count), self.mean_days, self.median_days], proportions, [match]]
        )

    def to_dict(self) -> dict:
        return {
            "assignee": self.assignee,
            "count": self.count,
            "mean_days": self.mean_days,
            "median_days": self.median_days,
            "histogram": list(self.histogram),
            "components": dict(sorted(self.components.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> AssigneeProfile:
        return cls(
            assignee=data["assignee"],
            count=int(data["count"]),
            mean_days=float(data["mean_days"]),
            median_days=float(data["median_days"]),
            histogram=tuple(int(v) for v in data["histogram"]),
            components={k: int(v) for k, v in data["components"].items()},
        )


def build_assignee_profiles(rows: Sequence[LabeledIssue]) -> dict[str, AssigneeProfile]:
    grouped: dict[str, list[LabeledIssue]] = {}
    for row in rows:
        name = (row.raw.assignee or "").strip()
        if name:
            grouped.setdefault(name, []).append(row)
    profiles: dict[str, AssigneeProfile] = {}
    for name in sorted(grouped):
        group = grouped[name]
        days = np.array([r.intervals.during_work for r in group], dtype=np.float64)
        histogram = [0, 0, 0, 0]
        components: Counter[str] = Counter()
        for r in group:
            histogram[int(r.category)] += 1
            primary = r.raw.primary_component()
            if primary:
                components[primary] += 1
        profiles[name] = AssigneeProfile(
            assignee=name,
            count=len(group),
            mean_days=float(days.mean()),
            median_days=float(np.median(days)),
            histogram=tuple(histogram),
            components=dict(sorted(components.items())),
        )
    return profiles


@dataclass
class SimilarityIndex:
    """Training documents searchable by cosine similarity.

    Ties on similarity go to the lexicographically earlier issue key.
    Negative cosines are clamped to zero before weighting so the histogram
    and the similarity statistics stay in [0, 1].
    """

    keys: tuple[str, ...]
    matrix: np.ndarray  # (n, d)
    categories: np.ndarray  # (n,) int in [0, NUM_CATEGORIES)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.categories = np.asarray(self.categories, dtype=np.int64)
        norms = np.linalg.norm(self.matrix, axis=1)
        self._norms = np.where(norms == 0.0, 1.0, norms)
        self._zero_rows = norms == 0.0
        self._key_array = np.asarray(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    def top_neighbors(
        self, query: np.ndarray, k: int, exclude_key: str | None = None
    ) -> list[tuple[str, float, int]]:
        """(key, clamped similarity, category) for the k nearest train docs."""
        query = np.asarray(query, dtype=np.float64)
        if len(self.keys) == 0 or float(np.linalg.norm(query)) == 0.0:
            return []
        sims = (self.matrix @ query) / (self._norms * np.linalg.norm(query))
        sims = np.where(self._zero_rows, 0.0, np.maximum(sims, 0.0))
        # lexsort: last key is primary, so rows order by sim desc, then key asc
        order = np.lexsort((self._key_array, -sims))
        out: list[tuple[str, float, int]] = []
        for i in order:
            if exclude_key is not None and self.keys[i] == exclude_key:
                continue
            out.append((self.keys[i], float(sims[i]), int(self.categories[i])))
            if len(out) == k:
                break
        return out

    def features(self, query: np.ndarray, k: int, exclude_key: str | None = None) -> np.ndarray:
        """[4 sim-weighted category proportions, max sim, mean sim]."""
        neighbors = self.top_neighbors(query, k, exclude_key)
        if not neighbors:
            return np.array([0.25, 0.25, 0.25, 0.25, 0.0, 0.0])
        histogram = np.zeros(NUM_CATEGORIES, dtype=np.float64)
        sims = np.empty(len(neighbors), dtype=np.float64)
        for i, (_, sim, category) in enumerate(neighbors):
            histogram[category] += sim
            sims[i] = sim
        total = histogram.sum()
        histogram = histogram / total if total > 0 else np.full(NUM_CATEGORIES, 0.25)
        return np.concatenate([histogram, [float(sims.max()), float(sims.mean())]])

    def to_dict(self) -> dict:
        return {
            "keys": list(self.keys),
            "vectors": self.matrix.tolist(),
            "categories": self.categories.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SimilarityIndex:
        return cls(
            keys=tuple(data["keys"]),
            matrix=np.asarray(data["vectors"], dtype=np.float64),
            categories=np.asarray(data["categories"], dtype=np.int64),
        )


@dataclass
class FeatureExtractor:
    """Everything fitted on training rows needed to featurize any issue."""

    encoders: dict[str, CategoryEncoder]  # priority / issue_type / component / label
    profiles: dict[str, AssigneeProfile]
    vectorizer: Vectorizer | None
    reducer: LsaReducer | None
    embeddings: dict[str, DocVector] | None  # precomputed alternative to LSA
    topic_model: TopicModel
    sim_index: SimilarityIndex
    stopwords: frozenset[str]
    k_neighbors: int = 15

    @property
    def doc_dim(self) -> int:
        return self.topic_model.dim

    def view_dims(self) -> dict[str, int]:
        return {
            "priority": self.encoders["priority"].dim,
            "issue_type": self.encoders["issue_type"].dim,
            "component": self.encoders["component"].dim,
            "label": self.encoders["label"].dim,
            "assignee": ASSIGNEE_FEATURE_DIM,
            "topics": self.topic_model.k + 1,
            "similarity": SIMILARITY_FEATURE_DIM,
        }

    def doc_vector(self, issue: RawIssue) -> np.ndarray:
        if self.embeddings is not None:
            known = self.embeddings.get(issue.key)
            return known.values if known is not None else np.zeros(self.doc_dim)
        doc = clean_text(issue.summary, issue.description or "", self.stopwords, issue.key)
        tfidf = vectorize_matrix([doc], self.vectorizer)
        return self.reducer.transform(tfidf)[0]

    def view_row(
        self, name: str, issue: RawIssue, vec: np.ndarray, exclude_self: bool = False
    ) -> np.ndarray:
        if name == "priority":
            return self.encoders["priority"].encode(issue.priority)
        if name == "issue_type":
            return self.encoders["issue_type"].encode(issue.issue_type)
        if name == "component":
            return self.encoders["component"].encode(issue.primary_component())
        if name == "label":
            return self.encoders["label"].encode(issue.primary_label())
        if name == "assignee":
            profile = self.profiles.get((issue.assignee or "").strip())
            if profile is None:
                return np.zeros(ASSIGNEE_FEATURE_DIM)
            return profile.features(issue.primary_component())
        if name == "topics":
            assignment = assign_topic(DocVector(issue.key, vec), self.topic_model)
            row = np.zeros(self.topic_model.k + 1)
            row[assignment.topic_id] = 1.0
            row[-1] = assignment.distance
            return row
        if name == "similarity":
            return self.sim_index.features(
                vec, self.k_neighbors, exclude_key=issue.key if exclude_self else None
            )
        raise ValueError(f"unknown view {name!r}")

    def rows_for_issue(
        self, issue: RawIssue, vec: np.ndarray | None = None, exclude_self: bool = False
    ) -> dict[str, np.ndarray]:
        vec = self.doc_vector(issue) if vec is None else vec
        return {name: self.view_row(name, issue, vec, exclude_self) for name in VIEW_NAMES}

    def view_matrices(
        self, rows: Sequence[LabeledIssue], leave_self_out: bool
    ) -> dict[str, np.ndarray]:
        dims = self.view_dims()
        out = {name: np.zeros((len(rows), dims[name])) for name in VIEW_NAMES}
        for i, row in enumerate(rows):
            vec = self.doc_vector(row.raw)
            for name in VIEW_NAMES:
                out[name][i] = self.view_row(name, row.raw, vec, exclude_self=leave_self_out)
        return out

    def to_dict(self) -> dict:
        return {
            "encoders": {name: enc.to_dict() for name, enc in sorted(self.encoders.items())},
            "profiles": {name: p.to_dict() for name, p in sorted(self.profiles.items())},
            "vectorizer": self.vectorizer.to_dict() if self.vectorizer else None,
            "reducer": self.reducer.to_dict() if self.reducer else None,
            "embeddings": (
                {k: self.embeddings[k].values.tolist() for k in sorted(self.embeddings)}
                if self.embeddings is not None
                else None
            ),
            "topic_model": self.topic_model.to_dict(),
            "sim_index": self.sim_index.to_dict(),
            "stopwords": sorted(self.stopwords),
            "k_neighbors": self.k_neighbors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FeatureExtractor:
        embeddings = None
        if data["embeddings"] is not None:
            embeddings = {
                k: DocVector(k, np.asarray(v, dtype=np.float64))
                for k, v in data["embeddings"].items()
            }
        return cls(
            encoders={n: CategoryEncoder.from_dict(e) for n, e in data["encoders"].items()},
            profiles={n: AssigneeProfile.from_dict(p) for n, p in data["profiles"].items()},
            vectorizer=Vectorizer.from_dict(data["vectorizer"]) if data["vectorizer"] else None,
            reducer=LsaReducer.from_dict(data["reducer"]) if data["reducer"] else None,
            embeddings=embeddings,
            topic_model=TopicModel.from_dict(data["topic_model"]),
            sim_index=SimilarityIndex.from_dict(data["sim_index"]),
            stopwords=frozenset(data["stopwords"]),
            k_neighbors=int(data["k_neighbors"]),
        )


@dataclass
class FeatureView:
    """One named view's feature matrix; row i always refers to issue i."""

    name: str
    X: np.ndarray


def build_views(
    rows: Sequence[LabeledIssue], extractor: FeatureExtractor, leave_self_out: bool = True
) -> list[FeatureView]:
    matrices = extractor.view_matrices(rows, leave_self_out=leave_self_out)
    return [FeatureView(name=name, X=matrices[name]) for name in VIEW_NAMES]


def fit_extractor(rows: Sequence[LabeledIssue], config: ProjectConfig) -> FeatureExtractor:
    """Fit encoders, text pipeline, topics, profiles, and the similarity index.

    Only the rows passed in are consumed, so giving this the training
    partition alone is the leakage boundary.
    """
    stop = default_stopwords() | {
        w.strip().lower() for w in config.text.extra_stopwords if w.strip()
    }
    docs = [
        clean_text(r.raw.summary, r.raw.description or "", stop, r.key) for r in rows
    ]
    keys = [r.key for r in rows]

    vectorizer: Vectorizer | None = None
    reducer: LsaReducer | None = None
    embeddings: dict[str, DocVector] | None = None
    if config.text.embedding_file:
        embeddings = load_embeddings(config.text.embedding_file, keys)
        doc_matrix = np.stack([embeddings[k].values for k in keys])
    else:
        vectorizer = fit_vectorizer(docs, min_df=config.text.min_df, max_vocab=config.text.max_vocab)
        tfidf = vectorize_matrix(docs, vectorizer)
        rank = min(config.text.lsa_dim, len(rows), vectorizer.dim)
        _, reducer = reduce_dimensionality(tfidf, rank, config.seed, keys=keys)
        # transform() is the only projection available at predict time, so the
        # stored coordinates come from it too (not the SVD's left factors)
        doc_matrix = reducer.transform(tfidf)

    k_min, k_max = default_k_range(len(rows))
    if config.topics.k_min is not None:
        k_min = config.topics.k_min
    if config.topics.k_max is not None:
        k_max = config.topics.k_max
    k_max = max(k_max, k_min)
    doc_vectors = [DocVector(keys[i], doc_matrix[i]) for i in range(len(rows))]
    topic_model, assignments = fit_topics(doc_vectors, (k_min, k_max), config.seed)
    topic_model.keywords = topic_keywords(
        topic_model, docs, assignments, top_n=config.topics.top_keywords
    )

    encoders = {
        "priority": CategoryEncoder.fit(r.raw.priority for r in rows),
        "issue_type": CategoryEncoder.fit(r.raw.issue_type for r in rows),
        "component": CategoryEncoder.fit(r.raw.primary_component() for r in rows),
        "label": CategoryEncoder.fit(r.raw.primary_label() for r in rows),
    }
    sim_index = SimilarityIndex(
        keys=tuple(keys),
        matrix=doc_matrix,
        categories=np.array([int(r.category) for r in rows], dtype=np.int64),
    )
    return FeatureExtractor(
        encoders=encoders,
        profiles=build_assignee_profiles(rows),
        vectorizer=vectorizer,
        reducer=reducer,
        embeddings=embeddings,
        topic_model=topic_model,
        sim_index=sim_index,
        stopwords=frozenset(stop),
        k_neighbors=config.stacking.k_neighbors,
    )


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------


def stratified_kfold(labels: Sequence[int], folds: int, seed: int) -> list[np.ndarray]:
    """Row indices of each fold's held-out partition, class-balanced.

    Every class present must have at least `folds` members so each fold
    sees every class during retraining.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    fold_rows: list[list[int]] = [[] for _ in range(folds)]
    for cls in sorted(set(labels.tolist())):
        idx = np.nonzero(labels == cls)[0]
        if len(idx) < folds:
            raise StratificationError(cls, len(idx), folds)
        for i, row in enumerate(rng.permutation(idx)):
            fold_rows[i % folds].append(int(row))
    return [np.sort(np.asarray(rows, dtype=np.int64)) for rows in fold_rows]


def _train_base(kind: str, X: np.ndarray, y: np.ndarray, config: ProjectConfig):
    data = Dataset(X, y, NUM_CATEGORIES)
    if kind == "tree":
        params = config.learners.tree
        return train_tree(data, max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    if kind == "forest":
        params = config.learners.forest
        return train_forest(
            data,
            n_trees=params.n_trees,
            max_depth=params.max_depth,
            min_samples_leaf=params.min_samples_leaf,
            seed=config.seed,
        )
    params = config.learners.logreg
    return train_logreg(
        data, l2=params.l2, lr=params.lr, max_epochs=params.max_epochs, tol=params.tol,
        seed=config.seed,
    )


@dataclass
class StackedModel:
    """The full fitted artifact: extractor + per-view bases + meta-learner."""

    project: str
    extractor: FeatureExtractor
    base_models: dict[str, LogRegModel | TreeModel | ForestModel]
    meta: LogRegModel
    view_names: tuple[str, ...]
    config: dict
    seed: int
    naive_stacking: bool = False
    oof_folds: list[list[int]] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return NUM_CATEGORIES

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "project": self.project,
            "extractor": self.extractor.to_dict(),
            "base_models": {n: model_to_dict(m) for n, m in sorted(self.base_models.items())},
            "meta": self.meta.to_dict(),
            "view_names": list(self.view_names),
            "config": self.config,
            "seed": self.seed,
            "naive_stacking": self.naive_stacking,
            "oof_folds": [list(f) for f in self.oof_folds],
        }

    @classmethod
    def from_dict(cls, data: dict) -> StackedModel:
        if data.get("version") != MODEL_VERSION:
            raise BundleError(f"unsupported model version {data.get('version')!r}")
        return cls(
            project=data["project"],
            extractor=FeatureExtractor.from_dict(data["extractor"]),
            base_models={n: model_from_dict(m) for n, m in data["base_models"].items()},
            meta=LogRegModel.from_dict(data["meta"]),
            view_names=tuple(data["view_names"]),
            config=data["config"],
            seed=int(data["seed"]),
            naive_stacking=bool(data["naive_stacking"]),
            oof_folds=[[int(i) for i in f] for f in data["oof_folds"]],
        )


def train_stacked(
    rows: Sequence[LabeledIssue],
    extractor: FeatureExtractor,
    config: ProjectConfig,
    project: str = "",
) -> StackedModel:
    """Train per-view base models plus the out-of-fold meta-learner.

    Meta-training inputs are out-of-fold base probabilities unless
    config.stacking.naive is set, which is an ablation that reuses the
    full-training base models on their own training rows.
    """
    y = np.array([int(r.category) for r in rows], dtype=np.int64)
    folds = config.stacking.folds
    counts = np.bincount(y, minlength=NUM_CATEGORIES)
    for cls in range(NUM_CATEGORIES):
        if 0 < counts[cls] < folds:
            raise StratificationError(ResolutionCategory(cls).slug, int(counts[cls]), folds)

    view_X = extractor.view_matrices(rows, leave_self_out=True)
    assignments = config.learners.assignments
    base_models = {
        name: _train_base(assignments[name], view_X[name], y, config) for name in VIEW_NAMES
    }

    n = len(rows)
    meta_X = np.zeros((n, len(VIEW_NAMES) * NUM_CATEGORIES))
    oof_folds: list[list[int]] = []
    if config.stacking.naive:
        for j, name in enumerate(VIEW_NAMES):
            block = slice(j * NUM_CATEGORIES, (j + 1) * NUM_CATEGORIES)
            meta_X[:, block] = base_models[name].predict_proba_batch(view_X[name])
    else:
        for held_out in stratified_kfold(y, folds, config.seed):
            mask = np.ones(n, dtype=bool)
            mask[held_out] = False
            in_rows = np.nonzero(mask)[0]
            for j, name in enumerate(VIEW_NAMES):
                fold_model = _train_base(
                    assignments[name], view_X[name][in_rows], y[in_rows], config
                )
                block = slice(j * NUM_CATEGORIES, (j + 1) * NUM_CATEGORIES)
                meta_X[held_out, block] = fold_model.predict_proba_batch(view_X[name][held_out])
            oof_folds.append([int(i) for i in held_out])

    meta_params = config.learners.meta
    meta = train_logreg(
        Dataset(meta_X, y, NUM_CATEGORIES),
        l2=meta_params.l2,
        lr=meta_params.lr,
        max_epochs=meta_params.max_epochs,
        tol=meta_params.tol,
        seed=config.seed,
    )
    return StackedModel(
        project=project,
        extractor=extractor,
        base_models=base_models,
        meta=meta,
        view_names=VIEW_NAMES,
        config=config.to_dict(),
        seed=config.seed,
        naive_stacking=config.stacking.naive,
        oof_folds=oof_folds,
    )


def train_pipeline(
    corpus: ProjectCorpus,
    config: ProjectConfig,
    train_indices: Sequence[int] | None = None,
) -> StackedModel:
    """Fit the extractor and the stacked model on the given corpus rows."""
    if train_indices is None:
        rows = list(corpus.issues)
    else:
        rows = [corpus.issues[i] for i in train_indices]
    extractor = fit_extractor(rows, config)
    return train_stacked(rows, extractor, config, project=corpus.project)


# ---------------------------------------------------------------------------
# Prediction, explanation, what-if
# ---------------------------------------------------------------------------


@dataclass
class Prediction:
    """Final probabilities plus the per-view vectors that produced them.

    per_view_probs are exactly the meta-learner's inputs: concatenating
    them in view order and applying the stored meta model reproduces
    final_probs. context carries the narrative raw material (assignee,
    matched topic, nearest neighbors) so explanations need no re-featurizing.
    """

    issue_key: str
    final_probs: np.ndarray
    per_view_probs: dict[str, np.ndarray]
    predicted: ResolutionCategory
    context: dict = field(default_factory=dict)


def predict(model: StackedModel, issue: RawIssue) -> Prediction:
    vec = model.extractor.doc_vector(issue)
    rows = model.extractor.rows_for_issue(issue, vec=vec)
    per_view = {name: model.base_models[name].predict_proba(rows[name]) for name in model.view_names}
    meta_input = np.concatenate([per_view[name] for name in model.view_names])
    final = model.meta.predict_proba(meta_input)
    # ties go to the earlier (shorter-duration) category; argmax returns the
    # first maximum so the enum ordering already encodes that rule
    predicted = ResolutionCategory(int(np.argmax(final)))

    topic = assign_topic(DocVector(issue.key, vec), model.extractor.topic_model)
    neighbors = model.extractor.sim_index.top_neighbors(vec, k=3)
    context = {
        "assignee": (issue.assignee or "").strip(),
        "topic_id": topic.topic_id,
        "topic_distance": topic.distance,
        "neighbors": [[key, sim, category] for key, sim, category in neighbors],
    }
    return Prediction(
        issue_key=issue.key,
        final_probs=final,
        per_view_probs=per_view,
        predicted=predicted,
        context=context,
    )


@dataclass
class Explanation:
    """Decomposition of a prediction into its per-view evidence."""

    prediction: Prediction
    per_view_top: dict[str, tuple[ResolutionCategory, float]]
    agreement_flags: tuple[str, ...]
    narratives: dict[str, str]


def _assignee_narrative(model: StackedModel, assignee: str) -> str:
    if not assignee:
        return "Issue is unassigned; assignee history contributed nothing."
    profile = model.extractor.profiles.get(assignee)
    if profile is None:
        return f"No training history for assignee {assignee}."
    modal = ResolutionCategory(int(np.argmax(profile.histogram)))
    return (
        f"Assignee {profile.assignee} resolved {profile.count} training issues "
        f"(mean {profile.mean_days:.1f} days, median {profile.median_days:.1f}); "
        f"most often {modal.display.lower()}."
    )


def _topic_narrative(model: StackedModel, topic_id: int, distance: float) -> str:
    words = []
    if topic_id < len(model.extractor.topic_model.keywords):
        words = [t for t, _ in model.extractor.topic_model.keywords[topic_id][:5]]
    if not words:
        return f"Nearest topic {topic_id} (distance {distance:.3f}); no keywords available."
    return f"Nearest topic {topic_id} (distance {distance:.3f}): {', '.join(words)}."


def _similarity_narrative(neighbors: list[list]) -> str:
    if not neighbors:
        return "No similar resolved issues found (empty or out-of-vocabulary text)."
    parts = [
        f"{key} (sim {sim:.2f}, {ResolutionCategory(int(category)).display.lower()})"
        for key, sim, category in neighbors
    ]
    return "Most similar resolved issues: " + "; ".join(parts) + "."


def explain(model: StackedModel, prediction: Prediction) -> Explanation:
    per_view_top: dict[str, tuple[ResolutionCategory, float]] = {}
    agreement: list[str] = []
    for name in model.view_names:
        probs = prediction.per_view_probs[name]
        top = ResolutionCategory(int(np.argmax(probs)))
        per_view_top[name] = (top, float(probs[int(top)]))
        if top == prediction.predicted:
            agreement.append(name)

    ctx = prediction.context
    narratives = {
        "priority": f"Priority view leans {per_view_top['priority'][0].display.lower()} "
        f"({per_view_top['priority'][1]:.0%}).",
        "issue_type": f"Issue-type view leans {per_view_top['issue_type'][0].display.lower()} "
        f"({per_view_top['issue_type'][1]:.0%}).",
        "component": f"Component view leans {per_view_top['component'][0].display.lower()} "
        f"({per_view_top['component'][1]:.0%}).",
        "label": f"Label view leans {per_view_top['label'][0].display.lower()} "
        f"({per_view_top['label'][1]:.0%}).",
        "assignee": _assignee_narrative(model, ctx.get("assignee", "")),
        "topics": _topic_narrative(
            model, int(ctx.get("topic_id", 0)), float(ctx.get("topic_distance", 0.0))
        ),
        "similarity": _similarity_narrative(ctx.get("neighbors", [])),
    }
    return Explanation(
        prediction=prediction,
        per_view_top=per_view_top,
        agreement_flags=tuple(agreement),
        narratives=narratives,
    )


@dataclass
class WhatIfResult:
    baseline: Prediction
    modified: Prediction
    delta: np.ndarray  # modified.final_probs - baseline.final_probs


def whatif(model: StackedModel, issue: RawIssue, overrides: Mapping[str, object]) -> WhatIfResult:
    """Re-predict under hypothetical metadata; only triage fields may change."""
    bad = set(overrides) - OVERRIDABLE_FIELDS
    if bad:
        raise OverrideError(sorted(bad))
    changes: dict[str, object] = {}
    for name, value in overrides.items():
        if name in ("components", "labels"):
            if not isinstance(value, (list, tuple)):
                raise OverrideError([name])
            changes[name] = tuple(str(v) for v in value)
        else:
            changes[name] = None if value is None else str(value)
    baseline = predict(model, issue)
    modified = predict(model, dataclasses.replace(issue, **changes)) if changes else baseline
    return WhatIfResult(
        baseline=baseline, modified=modified, delta=modified.final_probs - baseline.final_probs
    )
