"""Shared fixtures: one small trained pipeline reused across test modules."""

from __future__ import annotations

from pathlib import Path

import pytest

import synth
from fixtime.bundle import Bundle, save_bundle
from fixtime.cli import _corpus_topics
from fixtime.config import ProjectConfig
from fixtime.ensemble import StackedModel, train_pipeline
from fixtime.evaluation import insights
from fixtime.lifecycle import ProjectCorpus


@pytest.fixture(scope="session")
def quick_config() -> ProjectConfig:
    """Small everything: keeps the session-wide training fixtures fast."""
    return ProjectConfig.from_dict(
        {
            "text": {"min_df": 1, "lsa_dim": 12},
            "topics": {"k_min": 2, "k_max": 3},
            "learners": {"forest": {"n_trees": 8}},
            "stacking": {"folds": 3, "k_neighbors": 5},
        }
    )


@pytest.fixture(scope="session")
def small_corpus() -> ProjectCorpus:
    return synth.synth_corpus(240, seed=11)


@pytest.fixture(scope="session")
def trained(small_corpus, quick_config) -> StackedModel:
    return train_pipeline(small_corpus, quick_config)


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory, small_corpus, quick_config, trained) -> Path:
    """Directory holding one saved bundle for the serve/CLI tests."""
    tables = insights(small_corpus, topics_by_key=_corpus_topics(trained))
    bundle = Bundle(
        project=small_corpus.project,
        model=trained,
        insights=tables,
        topic_report=trained.extractor.topic_model.report(),
    )
    directory = tmp_path_factory.mktemp("bundles")
    save_bundle(bundle, directory / f"{small_corpus.project}.json")
    return directory
