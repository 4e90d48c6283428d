"""Stratified splitting, end-to-end evaluation, and descriptive insights.

Splitting allocates per-class training counts by largest remainder so the
total equals round(ratio * n) while every class stays within one sample of
ratio * class_count. Evaluation fits the full pipeline on the training
partition only and reports standard metrics plus each view's solo accuracy.
Insight tables cross-tabulate resolution categories against priority, issue
type, primary component, and (when available) topic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fixtime.config import VIEW_NAMES, ProjectConfig
from fixtime.ensemble import StackedModel, train_pipeline
from fixtime.errors import StratificationError
from fixtime.learners import Metrics, metrics
from fixtime.lifecycle import CATEGORY_SLUGS, NUM_CATEGORIES, ProjectCorpus

__all__ = [
    "SplitSpec",
    "EvalReport",
    "InsightTables",
    "stratified_split",
    "temporal_split",
    "evaluate",
    "evaluate_seeds",
    "insights",
    "write_insights_csv",
]


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float = 0.8
    seed: int = 7

    def __post_init__(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must be in (0, 1)")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(
    labels: Sequence[int], spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive (train, test) indices preserving class balance.

    Per-class training counts are floor(ratio * count) plus largest-remainder
    corrections until the total reaches round(ratio * n); rows within a class
    are shuffled by the seed. Classes are processed in ascending label order,
    so the split is deterministic.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("labels are empty")
    classes = sorted(set(labels.tolist()))
    for cls in classes:
        count = int(np.sum(labels == cls))
        if count < 2:
            raise StratificationError(cls, count, 2)

    target_total = _round_half_up(spec.train_ratio * n)
    exact = {cls: spec.train_ratio * int(np.sum(labels == cls)) for cls in classes}
    base = {cls: int(math.floor(exact[cls])) for cls in classes}
    leftover = target_total - sum(base.values())
    # hand out the remaining slots to the largest fractional remainders;
    # ties resolve to the smaller class label
    by_remainder = sorted(classes, key=lambda c: (-(exact[c] - base[c]), c))
    for cls in by_remainder[:leftover]:
        base[cls] += 1

    rng = np.random.default_rng(spec.seed)
    train: list[int] = []
    test: list[int] = []
    for cls in classes:
        idx = np.nonzero(labels == cls)[0]
        perm = rng.permutation(idx)
        take = base[cls]
        train.extend(int(i) for i in perm[:take])
        test.extend(int(i) for i in perm[take:])
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def temporal_split(corpus: ProjectCorpus, train_ratio: float) -> tuple[np.ndarray, np.ndarray]:
    """Oldest round(ratio * n) issues train, the rest test; no shuffling."""
    order = np.argsort([issue.raw.created_at for issue in corpus.issues], kind="stable")
    cut = _round_half_up(train_ratio * len(order))
    return np.sort(order[:cut]), np.sort(order[cut:])


@dataclass
class EvalReport:
    """Held-out metrics for one train/test split of one corpus."""

    project: str
    seed: int
    n_train: int
    n_test: int
    metrics: Metrics
    view_accuracies: dict[str, float]  # each base model evaluated alone

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    def to_dict(self) -> dict:
        return {
            "project": self.project,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            **self.metrics.to_dict(),
            "view_accuracies": dict(sorted(self.view_accuracies.items())),
        }


def _test_predictions(
    model: StackedModel, view_X: dict[str, np.ndarray]
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    per_view = {name: model.base_models[name].predict_proba_batch(view_X[name]) for name in VIEW_NAMES}
    meta_X = np.concatenate([per_view[name] for name in VIEW_NAMES], axis=1)
    return model.meta.predict_proba_batch(meta_X), per_view


def evaluate(
    corpus: ProjectCorpus, config: ProjectConfig, seed: int | None = None
) -> EvalReport:
    """Split, train the full pipeline on the train rows, score the rest."""
    split_seed = config.seed if seed is None else seed
    if config.temporal_split:
        train_idx, test_idx = temporal_split(corpus, config.train_ratio)
    else:
        train_idx, test_idx = stratified_split(
            corpus.labels(), SplitSpec(train_ratio=config.train_ratio, seed=split_seed)
        )
    run_config = config if seed is None else _with_seed(config, seed)
    model = train_pipeline(corpus, run_config, train_indices=train_idx)

    test_rows = [corpus.issues[i] for i in test_idx]
    y_true = np.array([int(r.category) for r in test_rows], dtype=np.int64)
    view_X = model.extractor.view_matrices(test_rows, leave_self_out=False)
    final_probs, per_view = _test_predictions(model, view_X)
    y_pred = np.argmax(final_probs, axis=1)

    view_accuracies = {
        name: float(np.mean(np.argmax(per_view[name], axis=1) == y_true)) for name in VIEW_NAMES
    }
    return EvalReport(
        project=corpus.project,
        seed=split_seed,
        n_train=len(train_idx),
        n_test=len(test_idx),
        metrics=metrics(y_true, y_pred, NUM_CATEGORIES),
        view_accuracies=view_accuracies,
    )


def _with_seed(config: ProjectConfig, seed: int) -> ProjectConfig:
    data = config.to_dict()
    data["seed"] = seed
    return ProjectConfig.from_dict(data)


def evaluate_seeds(
    corpus: ProjectCorpus, config: ProjectConfig, seeds: Sequence[int]
) -> list[EvalReport]:
    return [evaluate(corpus, config, seed=s) for s in seeds]


# ---------------------------------------------------------------------------
# Insight tables
# ---------------------------------------------------------------------------


@dataclass
class InsightTables:
    """Category count cross-tabs; every table's grand total is the corpus size."""

    project: str
    total: int
    by_priority: dict[str, list[int]]
    by_issue_type: dict[str, list[int]]
    by_component: dict[str, list[int]]
    by_topic: dict[str, list[int]] | None = None

    def tables(self) -> dict[str, dict[str, list[int]]]:
        named = {
            "by_priority": self.by_priority,
            "by_issue_type": self.by_issue_type,
            "by_component": self.by_component,
        }
        if self.by_topic is not None:
            named["by_topic"] = self.by_topic
        return named

    def to_dict(self) -> dict:
        payload: dict = {
            "project": self.project,
            "total": self.total,
            "categories": list(CATEGORY_SLUGS),
        }
        for name, table in self.tables().items():
            payload[name] = {
                "counts": {row: list(counts) for row, counts in table.items()},
                "proportions": {
                    row: [c / s for c in counts] if (s := sum(counts)) else [0.0] * len(counts)
                    for row, counts in table.items()
                },
            }
        return payload

    @classmethod
    def from_dict(cls, data: dict) -> InsightTables:
        def counts_of(name: str) -> dict[str, list[int]] | None:
            if name not in data:
                return None
            return {row: [int(c) for c in counts] for row, counts in data[name]["counts"].items()}

        return cls(
            project=data["project"],
            total=int(data["total"]),
            by_priority=counts_of("by_priority") or {},
            by_issue_type=counts_of("by_issue_type") or {},
            by_component=counts_of("by_component") or {},
            by_topic=counts_of("by_topic"),
        )


_MISSING_ROW = "(none)"


def _cross_tab(rows: Sequence[tuple[str | None, int]]) -> dict[str, list[int]]:
    table: dict[str, list[int]] = {}
    for value, category in rows:
        key = (value or "").strip().lower() or _MISSING_ROW
        table.setdefault(key, [0] * NUM_CATEGORIES)[category] += 1
    return dict(sorted(table.items()))


def insights(
    corpus: ProjectCorpus, topics_by_key: Mapping[str, int] | None = None
) -> InsightTables:
    """Cross-tabulate categories by priority, type, primary component, topic.

    The topic table is included only when an issue-key -> topic mapping is
    supplied (it requires a fitted model, unlike the metadata tables).
    """
    cats = [int(issue.category) for issue in corpus.issues]
    by_topic = None
    if topics_by_key is not None:
        pairs = []
        for issue, cat in zip(corpus.issues, cats):
            topic = topics_by_key.get(issue.key)
            pairs.append((f"topic_{topic}" if topic is not None else None, cat))
        by_topic = _cross_tab(pairs)
    return InsightTables(
        project=corpus.project,
        total=len(corpus),
        by_priority=_cross_tab(
            [(i.raw.priority, c) for i, c in zip(corpus.issues, cats)]
        ),
        by_issue_type=_cross_tab(
            [(i.raw.issue_type, c) for i, c in zip(corpus.issues, cats)]
        ),
        by_component=_cross_tab(
            [(i.raw.primary_component(), c) for i, c in zip(corpus.issues, cats)]
        ),
        by_topic=by_topic,
    )


def write_insights_csv(tables: InsightTables, out_dir: str | Path) -> list[Path]:
    """One CSV per table, plot-ready: value, one column per category, total."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name, table in tables.tables().items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["value", *CATEGORY_SLUGS, "total"])
            for row, counts in table.items():
                writer.writerow([row, *counts, sum(counts)])
        written.append(path)
    return written


def report_to_json(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
