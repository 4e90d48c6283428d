"""Issue text cleaning, TF-IDF vectors, and dense document embeddings.

Cleaning concatenates summary and description, strips HTML tags, replaces
every non-alphabetic character with whitespace (which also erases numbers),
lowercases, drops stopwords, and reduces each token to a stem. The stemmer
is a deterministic suffix-stripping table (see STEM_RULES) applied to a
fixpoint, which keeps hand-computed oracles valid and makes re-cleaning a
stem stream a no-op.

The built-in document representation is TF-IDF followed by a seeded
randomized truncated SVD ("LSA"); precomputed embedding files (JSONL, one
{"key": ..., "vector": [...]} per line) can replace it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from fixtime.errors import (
    DimensionError,
    EmbeddingFormatError,
    MissingEmbedding,
    VocabularyEmpty,
)

__all__ = [
    "TokenizedDoc",
    "DocVector",
    "Vectorizer",
    "LsaReducer",
    "STEM_RULES",
    "stem",
    "default_stopwords",
    "load_stopwords",
    "clean_text",
    "fit_vectorizer",
    "vectorize",
    "reduce_dimensionality",
    "load_embeddings",
]

_HTML_TAG = re.compile(r"<[^>]*>")
_NON_ALPHA = re.compile(r"[^a-zA-Z]+")

# Suffix-stripping rules: (suffix, replacement, minimum length of the part
# left after removing the suffix, required last char of that part or None).
# Longest matching suffix wins; the table is re-applied until no rule fires,
# so stemming is idempotent by construction. Every replacement is shorter
# than its suffix, which guarantees termination.
STEM_RULES: tuple[tuple[str, str, int, str | None], ...] = (
    ("ization", "ize", 3, None),
    ("ational", "ate", 3, None),
    ("fulness", "", 3, None),
    ("iveness", "ive", 3, None),
    ("ousness", "ous", 3, None),
    ("tional", "tion", 2, None),
    ("sses", "ss", 2, None),
    ("ance", "", 4, None),
    ("ence", "", 4, None),
    ("ation", "", 4, None),
    ("ment", "", 6, None),
    ("ness", "", 3, None),
    ("able", "", 3, None),
    ("ible", "", 3, None),
    ("ancy", "", 3, None),
    ("ency", "", 3, None),
    ("ies", "y", 2, None),
    ("ity", "", 4, None),
    ("ing", "", 3, None),
    ("ion", "", 3, "s"),
    ("ion", "", 3, "t"),
    ("ful", "", 3, None),
    ("ous", "", 4, None),
    ("ed", "", 3, None),
    ("er", "", 5, None),
    ("al", "", 5, None),
    ("s", "", 3, None),
)
_S_EXCLUDED_ENDINGS = ("ss", "us", "is")


def stem(token: str) -> str:
    """Reduce a lowercase token to its stem via STEM_RULES (to a fixpoint)."""
    current = token
    while True:
        replaced = _apply_once(current)
        if replaced == current:
            return current
        current = replaced


def _apply_once(token: str) -> str:
    for suffix, replacement, min_len, last_char in STEM_RULES:
        if not token.endswith(suffix):
            continue
        head = token[: len(token) - len(suffix)]
        if len(head) < min_len:
            continue
        if last_char is not None and not head.endswith(last_char):
            continue
        if suffix == "s" and any(token.endswith(e) for e in _S_EXCLUDED_ENDINGS):
            continue
        return head + replacement
    return token


def default_stopwords() -> frozenset[str]:
    text = resources.files("fixtime").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-token-per-line stopword file."""
    with open(path, "r", encoding="utf-8") as handle:
        return frozenset(line.strip() for line in handle if line.strip())


@dataclass(frozen=True)
class TokenizedDoc:
    """Cleaned, stemmed tokens of one issue's text."""

    issue_key: str
    tokens: tuple[str, ...]


def clean_text(
    summary: str,
    description: str = "",
    stopwords: frozenset[str] | None = None,
    issue_key: str = "",
) -> TokenizedDoc:
    """Clean and tokenize issue text; an empty token list is permitted.

    Stopwords are dropped both before and after stemming so that cleaning
    its own output changes nothing.
    """
    stopwords = default_stopwords() if stopwords is None else stopwords
    text = _HTML_TAG.sub(" ", f"{summary} {description}")
    text = _NON_ALPHA.sub(" ", text).lower()
    tokens = []
    for word in text.split():
        if len(word) < 2 or word in stopwords:
            continue
        stemmed = stem(word)
        if len(stemmed) < 2 or stemmed in stopwords:
            continue
        tokens.append(stemmed)
    return TokenizedDoc(issue_key=issue_key, tokens=tuple(tokens))


@dataclass(frozen=True)
class DocVector:
    """Dense representation of one issue's text."""

    issue_key: str
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite embedding for {self.issue_key!r}")


@dataclass
class Vectorizer:
    """Fitted TF-IDF vocabulary; idf(t) = ln((1 + N) / (1 + df(t))) + 1."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    min_df: int
    max_vocab: int
    n_docs: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def to_dict(self) -> dict:
        ordered = sorted(self.vocabulary.items(), key=lambda kv: kv[1])
        return {
            "tokens": [t for t, _ in ordered],
            "idf": self.idf.tolist(),
            "min_df": self.min_df,
            "max_vocab": self.max_vocab,
            "n_docs": self.n_docs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Vectorizer:
        return cls(
            vocabulary={t: i for i, t in enumerate(data["tokens"])},
            idf=np.asarray(data["idf"], dtype=np.float64),
            min_df=data["min_df"],
            max_vocab=data["max_vocab"],
            n_docs=data["n_docs"],
        )


def fit_vectorizer(docs: Sequence[TokenizedDoc], min_df: int = 2, max_vocab: int = 20000) -> Vectorizer:
    """Fit vocabulary and idf over the given docs.

    Tokens with df >= min_df are kept, truncated to the max_vocab highest-df
    tokens (ties broken lexicographically smaller-first). Column indices are
    assigned in lexicographic token order.
    """
    df: dict[str, int] = {}
    for doc in docs:
        for token in set(doc.tokens):
            df[token] = df.get(token, 0) + 1
    eligible = [(token, count) for token, count in df.items() if count >= min_df]
    eligible.sort(key=lambda tc: (-tc[1], tc[0]))
    selected = sorted(token for token, _ in eligible[:max_vocab])
    if not selected:
        raise VocabularyEmpty(f"no token reached min_df={min_df} over {len(docs)} docs")
    n = len(docs)
    vocabulary = {token: idx for idx, token in enumerate(selected)}
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in selected], dtype=np.float64)
    return Vectorizer(vocabulary=vocabulary, idf=idf, min_df=min_df, max_vocab=max_vocab, n_docs=n)


def vectorize(doc: TokenizedDoc, vectorizer: Vectorizer) -> np.ndarray:
    """TF-IDF weights, L2-normalized; all-OOV or empty docs give a zero vector."""
    weights = np.zeros(vectorizer.dim, dtype=np.float64)
    for token in doc.tokens:
        idx = vectorizer.vocabulary.get(token)
        if idx is not None:
            weights[idx] += vectorizer.idf[idx]
    norm = np.linalg.norm(weights)
    if norm > 0:
        weights /= norm
    return weights


def vectorize_matrix(docs: Sequence[TokenizedDoc], vectorizer: Vectorizer) -> np.ndarray:
    """Stack vectorize() rows for a batch of docs."""
    matrix = np.zeros((len(docs), vectorizer.dim), dtype=np.float64)
    for row, doc in enumerate(docs):
        matrix[row] = vectorize(doc, vectorizer)
    return matrix


@dataclass
class LsaReducer:
    """Rank-d truncated SVD projection fitted by randomized subspace iteration."""

    components: np.ndarray  # (vocab, d) right singular vectors
    singular_values: np.ndarray  # (d,) non-increasing
    seed: int

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        """Project term-weight rows into the d-dimensional latent space."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if matrix.shape[1] != self.components.shape[0]:
            raise DimensionError(
                f"expected {self.components.shape[0]} columns, got {matrix.shape[1]}"
            )
        return matrix @ self.components

    def to_dict(self) -> dict:
        return {
            "components": self.components.tolist(),
            "singular_values": self.singular_values.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> LsaReducer:
        return cls(
            components=np.asarray(data["components"], dtype=np.float64),
            singular_values=np.asarray(data["singular_values"], dtype=np.float64),
            seed=data["seed"],
        )


def _randomized_svd(
    matrix: np.ndarray, d: int, seed: int, n_oversamples: int = 10, n_power_iter: int = 7
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Halko-style randomized truncated SVD, deterministic given seed.

    Signs are fixed so each right singular vector's largest-magnitude entry
    is positive.
    """
    rows, cols = matrix.shape
    sketch = min(d + n_oversamples, rows, cols)
    rng = np.random.default_rng([seed, 0x5D])
    test = rng.standard_normal((cols, sketch))
    basis = np.linalg.qr(matrix @ test)[0]
    for _ in range(n_power_iter):
        basis = np.linalg.qr(matrix.T @ basis)[0]
        basis = np.linalg.qr(matrix @ basis)[0]
    small = basis.T @ matrix
    u_small, s, vt = np.linalg.svd(small, full_matrices=False)
    u = (basis @ u_small)[:, :d]
    s = s[:d]
    vt = vt[:d]
    anchor = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), anchor])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def reduce_dimensionality(
    matrix: np.ndarray,
    d: int,
    seed: int,
    keys: Sequence[str] | None = None,
) -> tuple[list[DocVector], LsaReducer]:
    """Project a docs-by-vocab matrix to rank d; returns coords and the reducer.

    Document coordinates are U_d * S_d, equivalently rows @ components, so
    the returned reducer reproduces training rows and transforms new ones.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError("matrix must be 2-dimensional")
    rows, cols = matrix.shape
    if d < 1 or d > min(rows, cols):
        raise DimensionError(f"d={d} outside [1, {min(rows, cols)}] for a {rows}x{cols} matrix")
    if not np.any(matrix):
        raise DimensionError("matrix is all zeros")
    if keys is not None and len(keys) != rows:
        raise DimensionError(f"{len(keys)} keys for {rows} rows")

    u, s, vt = _randomized_svd(matrix, d, seed)
    coords = u * s
    reducer = LsaReducer(components=vt.T.copy(), singular_values=s.copy(), seed=seed)
    names = keys if keys is not None else [str(i) for i in range(rows)]
    vectors = [DocVector(issue_key=names[i], values=coords[i].copy()) for i in range(rows)]
    return vectors, reducer


def load_embeddings(path: str | Path, corpus_keys: Iterable[str]) -> dict[str, DocVector]:
    """Load a precomputed embedding file covering every corpus key."""
    vectors: dict[str, DocVector] = {}
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = record["key"]
                values = np.asarray(record["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise EmbeddingFormatError(f"line {line_no}: {exc}") from exc
            if values.ndim != 1:
                raise EmbeddingFormatError(f"line {line_no}: vector must be 1-dimensional")
            if dim is None:
                dim = values.shape[0]
            elif values.shape[0] != dim:
                raise EmbeddingFormatError(
                    f"line {line_no}: dimension {values.shape[0]} != {dim}"
                )
            vectors[key] = DocVector(issue_key=key, values=values)
    for key in corpus_keys:
        if key not in vectors:
            raise MissingEmbedding(key)
    return vectors


def embedding_map_to_dict(vectors: Mapping[str, DocVector]) -> dict:
    return {key: vec.values.tolist() for key, vec in sorted(vectors.items())}
