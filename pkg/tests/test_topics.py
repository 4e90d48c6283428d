"""Topic clustering, k selection, keyword ranking, assignment."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fixtime.errors import DimensionError, TooFewDocuments
from fixtime.textproc import DocVector, TokenizedDoc
from fixtime.topics import (
    TopicAssignment,
    TopicModel,
    assign_topic,
    default_k_range,
    fit_topics,
    topic_keywords,
)


def _blobs(seed=0, per_blob=30, centers=((0.0, 0.0), (10.0, 10.0))):
    rng = np.random.default_rng(seed)
    vectors, truth = [], []
    for blob, center in enumerate(centers):
        for i in range(per_blob):
            point = np.asarray(center) + rng.normal(scale=0.3, size=2)
            vectors.append(DocVector(f"B{blob}-{i}", point))
            truth.append(blob)
    return vectors, truth


class TestFitTopics:
    def test_separated_blobs_select_two_clusters(self):
        vectors, truth = _blobs()
        model, assignments = fit_topics(vectors, k_range=(2, 5), seed=3)
        assert model.k == 2
        # cluster ids may be swapped relative to the generator's labels
        first = [a.topic_id for a, t in zip(assignments, truth) if t == 0]
        second = [a.topic_id for a, t in zip(assignments, truth) if t == 1]
        assert len(set(first)) == 1 and len(set(second)) == 1
        assert first[0] != second[0]

    def test_identical_docs_degenerate(self):
        vectors = [DocVector(f"S{i}", [1.0, 2.0]) for i in range(10)]
        model, assignments = fit_topics(vectors, k_range=(2, 4), seed=0)
        assert model.k == 2
        assert model.inertia == 0.0
        assert sum(model.sizes) == 10

    def test_deterministic(self):
        vectors, _ = _blobs(seed=5)
        m1, a1 = fit_topics(vectors, k_range=(2, 4), seed=7)
        m2, a2 = fit_topics(vectors, k_range=(2, 4), seed=7)
        assert np.array_equal(m1.centroids, m2.centroids)
        assert a1 == a2

    def test_too_few_docs(self):
        with pytest.raises(TooFewDocuments):
            fit_topics([DocVector("A", [0.0])], k_range=(2, 3), seed=0)

    def test_k_min_validated(self):
        with pytest.raises(ValueError):
            fit_topics([DocVector(f"A{i}", [float(i)]) for i in range(5)], k_range=(1, 3), seed=0)

    def test_member_counts_cover_corpus(self):
        vectors, _ = _blobs(seed=2, per_blob=25)
        model, assignments = fit_topics(vectors, k_range=(2, 6), seed=1)
        assert sum(model.sizes) == len(vectors)
        counted = [sum(1 for a in assignments if a.topic_id == t) for t in range(model.k)]
        assert counted == model.sizes

    def test_selection_trace_covers_k_range(self):
        vectors, _ = _blobs(seed=4)
        model, _ = fit_topics(vectors, k_range=(2, 4), seed=2)
        assert [k for k, _ in model.selection_trace] == [2, 3, 4]

    def test_round_trip(self):
        vectors, _ = _blobs(seed=6, per_blob=10)
        model, _ = fit_topics(vectors, k_range=(2, 3), seed=0)
        clone = TopicModel.from_dict(model.to_dict())
        assert np.array_equal(clone.centroids, model.centroids)
        assert clone.selection_trace == model.selection_trace


def test_default_k_range_tracks_corpus_size():
    assert default_k_range(400) == (5, 7)
    assert default_k_range(2000) == (5, 15)
    assert default_k_range(100_000) == (5, 30)


class TestTopicKeywords:
    def _fixture(self, docs_by_topic):
        docs, assignments = [], []
        for topic, token_lists in enumerate(docs_by_topic):
            for i, tokens in enumerate(token_lists):
                key = f"T{topic}-{i}"
                docs.append(TokenizedDoc(key, tuple(tokens)))
                assignments.append(TopicAssignment(key, topic, 0.0))
        model = TopicModel(
            k=len(docs_by_topic),
            centroids=np.zeros((len(docs_by_topic), 2)),
            seed=0,
            selection_trace=[],
            sizes=[len(t) for t in docs_by_topic],
            inertia=0.0,
        )
        return model, docs, assignments

    def test_worked_example(self):
        model, docs, assignments = self._fixture([[["alloc", "alloc", "sorter"]]])
        # single topic: A = 3, f(alloc) = 2 -> 2 * ln(1 + 3/2)
        ranked = topic_keywords(model, docs, assignments, top_n=10)
        scores = dict(ranked[0])
        assert abs(scores["alloc"] - 2 * math.log(2.5)) < 1e-12

    def test_two_topic_example(self):
        model, docs, assignments = self._fixture([[["alloc", "alloc", "sorter"]], [["doc", "guide"]]])
        ranked = topic_keywords(model, docs, assignments, top_n=10)
        # A = 5/2, f(alloc) = 2 -> score 2 * ln(1 + 2.5/2) = 2 * ln(2.25)
        assert abs(dict(ranked[0])["alloc"] - 2 * math.log(2.25)) < 1e-12

    def test_exclusive_token_outranks_shared_one(self):
        # "shared" and "only" both appear twice in topic 0, but "shared" also
        # appears elsewhere, lowering its inverse class frequency
        model, docs, assignments = self._fixture(
            [[["only", "shared", "only", "shared"]], [["shared", "shared", "other"]]]
        )
        ranked = topic_keywords(model, docs, assignments, top_n=3)
        assert [t for t, _ in ranked[0]].index("only") < [t for t, _ in ranked[0]].index("shared")

    def test_empty_topic_gives_empty_list(self):
        model, docs, assignments = self._fixture([[["alpha"]], []])
        ranked = topic_keywords(model, docs, assignments, top_n=5)
        assert ranked[1] == []

    def test_top_n_zero(self):
        model, docs, assignments = self._fixture([[["alpha"]]])
        assert topic_keywords(model, docs, assignments, top_n=0) == [[]]

    def test_scores_nonnegative_and_absent_tokens_unscored(self):
        model, docs, assignments = self._fixture([[["aa", "bb"]], [["cc"]]])
        ranked = topic_keywords(model, docs, assignments, top_n=10)
        for words in ranked:
            assert all(score >= 0.0 for _, score in words)
        assert "cc" not in dict(ranked[0])

    def test_unassigned_doc_rejected(self):
        model, docs, _ = self._fixture([[["aa"]]])
        with pytest.raises(ValueError):
            topic_keywords(model, docs, [], top_n=3)


class TestAssignTopic:
    MODEL = TopicModel(
        k=3,
        centroids=np.array([[0.0, 0.0], [4.0, 0.0], [8.0, 0.0]]),
        seed=0,
        selection_trace=[],
        sizes=[1, 1, 1],
        inertia=0.0,
    )

    def test_exact_centroid(self):
        got = assign_topic(DocVector("X", [8.0, 0.0]), self.MODEL)
        assert got.topic_id == 2 and got.distance == 0.0

    def test_tie_goes_to_lowest_id(self):
        got = assign_topic(DocVector("X", [2.0, 0.0]), self.MODEL)
        assert got.topic_id == 0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            point = rng.normal(scale=5.0, size=2)
            got = assign_topic(DocVector("X", point), self.MODEL)
            dists = [float(np.linalg.norm(point - c)) for c in self.MODEL.centroids]
            assert got.topic_id == int(np.argmin(dists))
            assert abs(got.distance - min(dists)) < 1e-12

    def test_each_centroid_maps_to_itself(self):
        for i, centroid in enumerate(self.MODEL.centroids):
            assert assign_topic(DocVector("X", centroid), self.MODEL).topic_id == i

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            assign_topic(DocVector("X", [1.0, 2.0, 3.0]), self.MODEL)


def test_report_schema():
    model = TopicModel(
        k=2,
        centroids=np.zeros((2, 2)),
        seed=0,
        selection_trace=[(2, 0.5)],
        sizes=[3, 1],
        inertia=1.0,
        keywords=[[("alpha", 1.5)], [("beta", 0.5)]],
    )
    report = model.report()
    assert report == {
        "k": 2,
        "topics": [
            {"id": 0, "size": 3, "keywords": [["alpha", 1.5]]},
            {"id": 1, "size": 1, "keywords": [["beta", 0.5]]},
        ],
    }
