"""Reconstruct issue lifecycle intervals and bucket during-work time.

The issue lifecycle is split into three calendar-time intervals derived
from status transitions:

    before_work  creation -> first entry into an in-progress status
    during_work  first in-progress entry -> first subsequent resolved entry
    after_work   resolved entry -> first subsequent closed entry (optional)

during_work is the prediction target's source quantity and is mapped onto
four fixed buckets with half-open, lower-inclusive boundaries:

    [0, 0.5)  LESS_THAN_HALF_DAY
    [0.5, 2)  HALF_TO_TWO_DAYS
    [2, 5)    TWO_TO_FIVE_DAYS
    [5, inf)  MORE_THAN_FIVE_DAYS

Issues that never enter in-progress (or never reach resolved afterwards)
carry no effort signal and are excluded rather than back-filled from the
creation time. Status values are matched case-insensitively after trimming
against per-project alias sets.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from fixtime.errors import CorpusEmpty
from fixtime.ingest import ChangelogEntry, RawIssue, issue_from_record, issue_to_record

__all__ = [
    "ResolutionCategory",
    "LifecycleIntervals",
    "StatusMap",
    "NoWorkSignal",
    "InvalidIssue",
    "LabeledIssue",
    "ProjectCorpus",
    "categorize",
    "extract_intervals",
    "label_corpus",
    "corpus_to_dict",
    "corpus_from_dict",
    "save_corpus",
    "load_corpus",
]

SECONDS_PER_DAY = 86400.0


class ResolutionCategory(enum.IntEnum):
    """The four fixed during-work buckets, ordered short to long."""

    LESS_THAN_HALF_DAY = 0
    HALF_TO_TWO_DAYS = 1
    TWO_TO_FIVE_DAYS = 2
    MORE_THAN_FIVE_DAYS = 3

    @property
    def slug(self) -> str:
        return _SLUGS[self]

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def from_slug(cls, slug: str) -> ResolutionCategory:
        try:
            return _FROM_SLUG[slug]
        except KeyError:
            raise ValueError(f"unknown resolution category {slug!r}") from None


_SLUGS = {
    ResolutionCategory.LESS_THAN_HALF_DAY: "less_than_half_day",
    ResolutionCategory.HALF_TO_TWO_DAYS: "half_to_two_days",
    ResolutionCategory.TWO_TO_FIVE_DAYS: "two_to_five_days",
    ResolutionCategory.MORE_THAN_FIVE_DAYS: "more_than_five_days",
}
_DISPLAY = {
    ResolutionCategory.LESS_THAN_HALF_DAY: "Less than 0.5 days",
    ResolutionCategory.HALF_TO_TWO_DAYS: "0.5-2 days",
    ResolutionCategory.TWO_TO_FIVE_DAYS: "2-5 days",
    ResolutionCategory.MORE_THAN_FIVE_DAYS: "More than 5 days",
}
_FROM_SLUG = {slug: cat for cat, slug in _SLUGS.items()}

CATEGORY_SLUGS = tuple(_SLUGS[c] for c in ResolutionCategory)
NUM_CATEGORIES = len(ResolutionCategory)


def categorize(during_work: float) -> ResolutionCategory:
    """Map a during-work duration in fractional days onto its bucket.

    Boundaries are lower-inclusive, so exactly 0.5 falls in HALF_TO_TWO_DAYS
    and exactly 5.0 in MORE_THAN_FIVE_DAYS; the four buckets partition
    [0, inf). Negative or non-finite input is rejected.
    """
    if not math.isfinite(during_work) or during_work < 0:
        raise ValueError(f"during_work must be finite and >= 0, got {during_work!r}")
    if during_work < 0.5:
        return ResolutionCategory.LESS_THAN_HALF_DAY
    if during_work < 2.0:
        return ResolutionCategory.HALF_TO_TWO_DAYS
    if during_work < 5.0:
        return ResolutionCategory.TWO_TO_FIVE_DAYS
    return ResolutionCategory.MORE_THAN_FIVE_DAYS


@dataclass(frozen=True)
class LifecycleIntervals:
    """Durations in fractional days; after_work is None while still open."""

    before_work: float
    during_work: float
    after_work: float | None = None


@dataclass(frozen=True)
class NoWorkSignal:
    """The issue never produced a usable in-progress -> resolved episode."""

    reason: str


@dataclass(frozen=True)
class InvalidIssue:
    """The changelog yielded a negative duration (clock skew / bad data)."""

    reason: str


@dataclass(frozen=True)
class StatusMap:
    """Per-project status alias sets, matched case-insensitively after trim."""

    in_progress_aliases: frozenset[str] = frozenset({"In Progress"})
    resolved_aliases: frozenset[str] = frozenset({"Resolved"})
    closed_aliases: frozenset[str] = frozenset({"Closed"})

    def __post_init__(self) -> None:
        groups = [
            frozenset(_norm(s) for s in self.in_progress_aliases),
            frozenset(_norm(s) for s in self.resolved_aliases),
            frozenset(_norm(s) for s in self.closed_aliases),
        ]
        if any(not g for g in groups):
            raise ValueError("status alias sets must be nonempty")
        if len(groups[0] | groups[1] | groups[2]) != sum(len(g) for g in groups):
            raise ValueError("status alias sets must be pairwise disjoint")
        object.__setattr__(self, "_in_progress", groups[0])
        object.__setattr__(self, "_resolved", groups[1])
        object.__setattr__(self, "_closed", groups[2])

    def is_in_progress(self, status: str) -> bool:
        return _norm(status) in self._in_progress  # type: ignore[attr-defined]

    def is_resolved(self, status: str) -> bool:
        return _norm(status) in self._resolved  # type: ignore[attr-defined]

    def is_closed(self, status: str) -> bool:
        return _norm(status) in self._closed  # type: ignore[attr-defined]

    def to_dict(self) -> dict:
        return {
            "in_progress": sorted(self.in_progress_aliases),
            "resolved": sorted(self.resolved_aliases),
            "closed": sorted(self.closed_aliases),
        }

    @classmethod
    def from_dict(cls, data: dict) -> StatusMap:
        return cls(
            in_progress_aliases=frozenset(data.get("in_progress", ["In Progress"])),
            resolved_aliases=frozenset(data.get("resolved", ["Resolved"])),
            closed_aliases=frozenset(data.get("closed", ["Closed"])),
        )


def _norm(status: str) -> str:
    return status.strip().lower()


def extract_intervals(
    issue: RawIssue,
    status_map: StatusMap | None = None,
    accumulate_active_time: bool = False,
) -> LifecycleIntervals | NoWorkSignal | InvalidIssue:
    """Derive lifecycle intervals from an issue's status transitions.

    Only changelog entries for the "status" field are consulted. The default
    (elapsed) mode measures first-entry-into-in-progress to the first
    subsequent entry into resolved; accumulate_active_time instead sums only
    the stretches actually spent in an in-progress status before resolution.
    """
    status_map = status_map or StatusMap()
    entries = sorted((e for e in issue.changelog if e.is_status()), key=lambda e: e.at)

    started = _first_index(entries, 0, status_map.is_in_progress)
    if started is None:
        return NoWorkSignal("never entered in-progress")
    resolved = _first_index(entries, started + 1, status_map.is_resolved)
    if resolved is None:
        return NoWorkSignal("never resolved after in-progress")

    before = _days(issue.created_at, entries[started].at)
    if accumulate_active_time:
        during = _active_days(entries, started, resolved, status_map)
    else:
        during = _days(entries[started].at, entries[resolved].at)

    after: float | None = None
    closed = _first_index(entries, resolved + 1, status_map.is_closed)
    if closed is not None:
        after = _days(entries[resolved].at, entries[closed].at)

    for name, value in (("before_work", before), ("during_work", during), ("after_work", after)):
        if value is not None and value < 0:
            return InvalidIssue(f"negative {name} ({value:.4f} days)")
    return LifecycleIntervals(before_work=before, during_work=during, after_work=after)


def _first_index(entries: Sequence[ChangelogEntry], start: int, predicate) -> int | None:
    for idx in range(start, len(entries)):
        if predicate(entries[idx].to_value):
            return idx
    return None


def _days(start, end) -> float:
    return (end - start).total_seconds() / SECONDS_PER_DAY


def _active_days(entries, started, resolved, status_map: StatusMap) -> float:
    """Sum of time spent inside an in-progress status up to the resolution."""
    total = 0.0
    active_since = entries[started].at
    for entry in entries[started + 1 : resolved + 1]:
        if active_since is not None:
            total += _days(active_since, entry.at)
            active_since = None
        if status_map.is_in_progress(entry.to_value):
            active_since = entry.at
    return total


@dataclass(frozen=True)
class LabeledIssue:
    """An issue carrying its lifecycle intervals and resolution category."""

    raw: RawIssue
    intervals: LifecycleIntervals
    category: ResolutionCategory

    @property
    def key(self) -> str:
        return self.raw.key


@dataclass
class ProjectCorpus:
    """All labeled issues of one project plus how they were produced."""

    project: str
    issues: list[LabeledIssue]
    provenance: dict

    def __len__(self) -> int:
        return len(self.issues)

    def labels(self) -> list[int]:
        return [int(issue.category) for issue in self.issues]

    def keys(self) -> list[str]:
        return [issue.key for issue in self.issues]


CORPUS_VERSION = 1


def corpus_to_dict(corpus: ProjectCorpus) -> dict:
    issues = []
    for labeled in corpus.issues:
        record = issue_to_record(labeled.raw)
        record["intervals"] = {
            "before_work": labeled.intervals.before_work,
            "during_work": labeled.intervals.during_work,
            "after_work": labeled.intervals.after_work,
        }
        record["category"] = labeled.category.slug
        issues.append(record)
    return {
        "version": CORPUS_VERSION,
        "project": corpus.project,
        "provenance": corpus.provenance,
        "issues": issues,
    }


def corpus_from_dict(data: dict) -> ProjectCorpus:
    if data.get("version") != CORPUS_VERSION:
        raise ValueError(f"unsupported corpus version {data.get('version')!r}")
    issues = []
    for record in data["issues"]:
        intervals = LifecycleIntervals(
            before_work=float(record["intervals"]["before_work"]),
            during_work=float(record["intervals"]["during_work"]),
            after_work=(
                None
                if record["intervals"]["after_work"] is None
                else float(record["intervals"]["after_work"])
            ),
        )
        issues.append(
            LabeledIssue(
                raw=issue_from_record(record),
                intervals=intervals,
                category=ResolutionCategory.from_slug(record["category"]),
            )
        )
    if not issues:
        raise CorpusEmpty("corpus file contains no issues")
    return ProjectCorpus(project=data["project"], issues=issues, provenance=data["provenance"])


def save_corpus(corpus: ProjectCorpus, path: str | Path) -> None:
    Path(path).write_text(json.dumps(corpus_to_dict(corpus)) + "\n", encoding="utf-8")


def load_corpus(path: str | Path) -> ProjectCorpus:
    return corpus_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def label_corpus(
    issues: Iterable[RawIssue],
    status_map: StatusMap | None = None,
    accumulate_active_time: bool = False,
    provenance: dict | None = None,
) -> tuple[ProjectCorpus, Counter[str]]:
    """Attach intervals and categories; excluded issues are counted by reason.

    Raises CorpusEmpty when nothing survives.
    """
    status_map = status_map or StatusMap()
    labeled: list[LabeledIssue] = []
    report: Counter[str] = Counter()
    project = ""
    for issue in issues:
        project = project or issue.project
        outcome = extract_intervals(issue, status_map, accumulate_active_time)
        if isinstance(outcome, NoWorkSignal):
            report["no_work"] += 1
        elif isinstance(outcome, InvalidIssue):
            report["invalid"] += 1
        else:
            labeled.append(
                LabeledIssue(raw=issue, intervals=outcome, category=categorize(outcome.during_work))
            )
    if not labeled:
        raise CorpusEmpty("no issues with a usable during-work interval")
    corpus = ProjectCorpus(project=project, issues=labeled, provenance=provenance or {})
    return corpus, report
