"""Versioned project configuration.

One JSON document drives the whole pipeline: status aliases, corpus
filters, text/topic settings, per-view learner assignments and
hyperparameters, stacking options, and serving options. Parsing is strict —
unknown keys anywhere in the document are rejected so typos fail loudly
instead of silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from fixtime.errors import ConfigError
from fixtime.ingest import FilterConfig
from fixtime.lifecycle import StatusMap

CONFIG_VERSION = 1

VIEW_NAMES = ("priority", "issue_type", "component", "label", "assignee", "topics", "similarity")

LEARNER_KINDS = ("tree", "forest", "logreg")

DEFAULT_ASSIGNMENTS = {
    "priority": "tree",
    "issue_type": "tree",
    "label": "tree",
    "component": "forest",
    "topics": "forest",
    "assignee": "forest",
    "similarity": "logreg",
}


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _from_flat_dict(cls, data: dict, where: str):
    """Build a flat dataclass from a dict, rejecting unknown keys."""
    names = {f.name for f in fields(cls)}
    _check_keys(data, names, where)
    return cls(**data)


@dataclass
class TextConfig:
    min_df: int = 2
    max_vocab: int = 20000
    lsa_dim: int = 100
    embedding_file: str | None = None
    extra_stopwords: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.min_df < 1 or self.max_vocab < 1 or self.lsa_dim < 1:
            raise ConfigError("text settings must be positive")


@dataclass
class TopicConfig:
    k_min: int | None = None  # None → derived from corpus size
    k_max: int | None = None
    top_keywords: int = 10

    def __post_init__(self) -> None:
        if self.k_min is not None and self.k_min < 2:
            raise ConfigError("topics.k_min must be >= 2")
        if self.k_min is not None and self.k_max is not None and self.k_max < self.k_min:
            raise ConfigError("topics.k_max must be >= k_min")


@dataclass
class TreeParams:
    max_depth: int = 8
    min_samples_leaf: int = 5


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int = 8
    min_samples_leaf: int = 5


@dataclass
class LogRegParams:
    l2: float = 1e-3
    lr: float = 0.1
    max_epochs: int = 5000
    tol: float = 1e-7


@dataclass
class LearnerConfig:
    assignments: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ASSIGNMENTS))
    tree: TreeParams = field(default_factory=TreeParams)
    forest: ForestParams = field(default_factory=ForestParams)
    logreg: LogRegParams = field(default_factory=LogRegParams)
    meta: LogRegParams = field(default_factory=LogRegParams)

    def __post_init__(self) -> None:
        if set(self.assignments) != set(VIEW_NAMES):
            raise ConfigError(f"learners.assignments must cover exactly the views {VIEW_NAMES}")
        bad = {v: k for v, k in self.assignments.items() if k not in LEARNER_KINDS}
        if bad:
            raise ConfigError(f"unknown learner kinds: {bad}")

    @classmethod
    def from_dict(cls, data: dict) -> LearnerConfig:
        _check_keys(data, {"assignments", "tree", "forest", "logreg", "meta"}, "learners")
        kwargs = {}
        if "assignments" in data:
            kwargs["assignments"] = dict(data["assignments"])
        for name, sub in (("tree", TreeParams), ("forest", ForestParams),
                          ("logreg", LogRegParams), ("meta", LogRegParams)):
            if name in data:
                kwargs[name] = _from_flat_dict(sub, data[name], f"learners.{name}")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "assignments": dict(self.assignments),
            "tree": vars(self.tree).copy(),
            "forest": vars(self.forest).copy(),
            "logreg": vars(self.logreg).copy(),
            "meta": vars(self.meta).copy(),
        }


@dataclass
class StackingConfig:
    folds: int = 5
    k_neighbors: int = 15
    naive: bool = False  # ablation only: meta trained on in-sample base outputs

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigError("stacking.folds must be >= 2")
        if self.k_neighbors < 1:
            raise ConfigError("stacking.k_neighbors must be >= 1")


@dataclass
class ServeConfig:
    cors_origins: list[str] = field(default_factory=list)


@dataclass
class ProjectConfig:
    """Everything needed to reproduce a pipeline run, minus the data."""

    status_map: StatusMap = field(default_factory=StatusMap)
    filters: FilterConfig = field(default_factory=FilterConfig)
    text: TextConfig = field(default_factory=TextConfig)
    topics: TopicConfig = field(default_factory=TopicConfig)
    learners: LearnerConfig = field(default_factory=LearnerConfig)
    stacking: StackingConfig = field(default_factory=StackingConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)
    seed: int = 7
    train_ratio: float = 0.8
    temporal_split: bool = False
    accumulate_active_time: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError("train_ratio must be in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "status_map": self.status_map.to_dict(),
            "filters": self.filters.to_dict(),
            "text": {
                "min_df": self.text.min_df,
                "max_vocab": self.text.max_vocab,
                "lsa_dim": self.text.lsa_dim,
                "embedding_file": self.text.embedding_file,
                "extra_stopwords": list(self.text.extra_stopwords),
            },
            "topics": vars(self.topics).copy(),
            "learners": self.learners.to_dict(),
            "stacking": vars(self.stacking).copy(),
            "serve": {"cors_origins": list(self.serve.cors_origins)},
            "seed": self.seed,
            "train_ratio": self.train_ratio,
            "temporal_split": self.temporal_split,
            "accumulate_active_time": self.accumulate_active_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ProjectConfig:
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        allowed = {
            "version", "status_map", "filters", "text", "topics", "learners",
            "stacking", "serve", "seed", "train_ratio", "temporal_split",
            "accumulate_active_time",
        }
        _check_keys(data, allowed, "config")
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r}")
        try:
            kwargs = {}
            if "status_map" in data:
                _check_keys(
                    data["status_map"], {"in_progress", "resolved", "closed"}, "status_map"
                )
                kwargs["status_map"] = StatusMap.from_dict(data["status_map"])
            if "filters" in data:
                _check_keys(data["filters"], {f.name for f in fields(FilterConfig)}, "filters")
                kwargs["filters"] = FilterConfig.from_dict(data["filters"])
            if "text" in data:
                kwargs["text"] = _from_flat_dict(TextConfig, data["text"], "text")
            if "topics" in data:
                kwargs["topics"] = _from_flat_dict(TopicConfig, data["topics"], "topics")
            if "learners" in data:
                kwargs["learners"] = LearnerConfig.from_dict(data["learners"])
            if "stacking" in data:
                kwargs["stacking"] = _from_flat_dict(StackingConfig, data["stacking"], "stacking")
            if "serve" in data:
                kwargs["serve"] = _from_flat_dict(ServeConfig, data["serve"], "serve")
            for key in ("seed", "train_ratio", "temporal_split", "accumulate_active_time"):
                if key in data:
                    kwargs[key] = data[key]
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:  # bad value types or range violations
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ProjectConfig:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ProjectConfig.from_dict(data)


def save_config(config: ProjectConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
