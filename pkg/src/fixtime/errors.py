"""Exception types shared across the fixtime pipeline."""

from __future__ import annotations


class FixtimeError(Exception):
    """Base class for all fixtime errors."""


class ParseError(FixtimeError):
    """A dump line could not be parsed in strict mode."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CorpusEmpty(FixtimeError):
    """No issues survived filtering and lifecycle labeling."""


class VocabularyEmpty(FixtimeError):
    """Vectorizer fitting produced an empty vocabulary."""


class DimensionError(FixtimeError):
    """A vector or requested rank does not match the expected dimension."""


class MissingEmbedding(FixtimeError):
    """A precomputed embedding file does not cover a corpus issue key."""

    def __init__(self, key: str) -> None:
        super().__init__(f"no embedding for issue {key!r}")
        self.key = key


class EmbeddingFormatError(FixtimeError):
    """A precomputed embedding file is malformed or dimensionally inconsistent."""


class TooFewDocuments(FixtimeError):
    """Not enough documents to fit the requested number of topics."""


class DivergenceError(FixtimeError):
    """Gradient descent produced a non-finite loss."""

    def __init__(self, epoch: int) -> None:
        super().__init__(f"loss became non-finite at epoch {epoch} (learning rate too high?)")
        self.epoch = epoch


class StratificationError(FixtimeError):
    """A class has too few members for the requested stratified split."""

    def __init__(self, label: object, count: int, needed: int) -> None:
        super().__init__(f"class {label!r} has {count} members, needs at least {needed}")
        self.label = label
        self.count = count
        self.needed = needed


class OverrideError(FixtimeError):
    """A what-if request tried to override a non-overridable field."""

    def __init__(self, fields: list[str]) -> None:
        super().__init__(f"fields not overridable: {', '.join(sorted(fields))}")
        self.fields = sorted(fields)


class ConfigError(FixtimeError):
    """A project config file is malformed or contains unknown keys."""


class BundleError(FixtimeError):
    """A model bundle is missing, malformed, or has an unsupported version."""
