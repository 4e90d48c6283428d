"""Interpretable issue resolution-time prediction from tracker history.

The pipeline turns an issue-tracker dump into a stacked 4-class classifier:
ingest/filter -> lifecycle labeling -> text vectors + topics -> seven
feature views with per-view base models -> logistic meta-learner, served
over HTTP with per-view explanations and what-if re-prediction.
"""

from fixtime.config import ProjectConfig, load_config, save_config
from fixtime.ensemble import (
    Explanation,
    Prediction,
    StackedModel,
    WhatIfResult,
    explain,
    predict,
    train_pipeline,
    whatif,
)
from fixtime.errors import FixtimeError
from fixtime.evaluation import EvalReport, InsightTables, evaluate, insights, stratified_split
from fixtime.ingest import FilterConfig, RawIssue, filter_issues, parse_issue_dump
from fixtime.lifecycle import (
    LabeledIssue,
    ProjectCorpus,
    ResolutionCategory,
    StatusMap,
    categorize,
    extract_intervals,
    label_corpus,
    load_corpus,
    save_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "ProjectConfig",
    "load_config",
    "save_config",
    "Explanation",
    "Prediction",
    "StackedModel",
    "WhatIfResult",
    "explain",
    "predict",
    "train_pipeline",
    "whatif",
    "FixtimeError",
    "EvalReport",
    "InsightTables",
    "evaluate",
    "insights",
    "stratified_split",
    "FilterConfig",
    "RawIssue",
    "filter_issues",
    "parse_issue_dump",
    "LabeledIssue",
    "ProjectCorpus",
    "ResolutionCategory",
    "StatusMap",
    "categorize",
    "extract_intervals",
    "label_corpus",
    "load_corpus",
    "save_corpus",
    "__version__",
]
