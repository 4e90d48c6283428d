"""Parse issue-tracker dump files and apply per-project quality filters.

Dumps are JSONL: one issue object per line, UTF-8, with the schema

    {"key": str, "project": str, "summary": str, "description": str|null,
     "priority": str, "issue_type": str, "status": str, "resolution": str|null,
     "assignee": str|null, "components": [str], "labels": [str],
     "created_at": ISO-8601 UTC, "changelog": [{"at": ISO-8601 UTC,
     "field": str, "from": str, "to": str}]}

Unknown fields are ignored. Changelogs are sorted by timestamp on parse.
Filtering keeps resolved, assigned issues that carry component and label
information, then drops issues whose assignee has too little surviving
history to learn from.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from fixtime.errors import ParseError

__all__ = [
    "ChangelogEntry",
    "RawIssue",
    "FilterConfig",
    "ParseReport",
    "parse_timestamp",
    "parse_issue_dump",
    "filter_issues",
    "issue_from_record",
    "issue_to_record",
]

REQUIRED_FIELDS = ("key", "project", "created_at")


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime.

    Accepts a trailing "Z" and numeric offsets; naive timestamps are
    assumed to already be UTC.
    """
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


@dataclass(frozen=True)
class ChangelogEntry:
    """One changelog row; only field == "status" entries are consumed downstream."""

    at: datetime
    field: str
    from_value: str
    to_value: str

    def is_status(self) -> bool:
        return self.field.strip().lower() == "status"


@dataclass(frozen=True)
class RawIssue:
    """A normalized tracker issue as read from the dump."""

    key: str
    project: str
    summary: str
    description: str
    priority: str
    issue_type: str
    status: str
    resolution: str | None
    assignee: str | None
    components: tuple[str, ...]
    labels: tuple[str, ...]
    created_at: datetime
    changelog: tuple[ChangelogEntry, ...]

    def primary_component(self) -> str | None:
        """First listed component, lowercased and trimmed; None when absent."""
        return _primary(self.components)

    def primary_label(self) -> str | None:
        return _primary(self.labels)


def _primary(values: tuple[str, ...]) -> str | None:
    for value in values:
        norm = value.strip().lower()
        if norm:
            return norm
    return None


@dataclass(frozen=True)
class FilterConfig:
    """Quality filters applied per project before lifecycle labeling."""

    min_issues_per_assignee: int = 20
    require_component: bool = True
    require_label: bool = True
    require_resolved: bool = True
    require_assignee: bool = True

    def __post_init__(self) -> None:
        if self.min_issues_per_assignee < 1:
            raise ValueError("min_issues_per_assignee must be >= 1")

    def to_dict(self) -> dict:
        return {
            "min_issues_per_assignee": self.min_issues_per_assignee,
            "require_component": self.require_component,
            "require_label": self.require_label,
            "require_resolved": self.require_resolved,
            "require_assignee": self.require_assignee,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FilterConfig:
        return cls(**data)


@dataclass
class ParseReport:
    """Per-dump accounting of lines that did not yield an issue."""

    total_lines: int = 0
    parsed: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)

    def reasons(self) -> Counter[str]:
        return Counter(reason for _, reason in self.skipped)


def _issue_from_record(record: dict) -> RawIssue:
    """Build a RawIssue from a parsed JSON object.

    Raises ValueError when a required field is missing/empty, a timestamp is
    unparseable, or a changelog entry precedes the creation time.
    """
    for name in REQUIRED_FIELDS:
        if not record.get(name):
            raise ValueError(f"missing required field {name!r}")

    created_at = parse_timestamp(record["created_at"])

    entries = []
    for raw in record.get("changelog") or []:
        if not isinstance(raw, dict) or "at" not in raw:
            raise ValueError("changelog entry missing 'at'")
        entries.append(
            ChangelogEntry(
                at=parse_timestamp(raw["at"]),
                field=str(raw.get("field", "")),
                from_value=str(raw.get("from", "")),
                to_value=str(raw.get("to", "")),
            )
        )
    entries.sort(key=lambda e: e.at)
    if entries and entries[0].at < created_at:
        raise ValueError("changelog entry precedes created_at")

    description = record.get("description")
    return RawIssue(
        key=str(record["key"]),
        project=str(record["project"]),
        summary=str(record.get("summary") or ""),
        description=str(description) if description is not None else "",
        priority=str(record.get("priority") or ""),
        issue_type=str(record.get("issue_type") or ""),
        status=str(record.get("status") or ""),
        resolution=record.get("resolution"),
        assignee=record.get("assignee"),
        components=tuple(str(c) for c in record.get("components") or []),
        labels=tuple(str(v) for v in record.get("labels") or []),
        created_at=created_at,
        changelog=tuple(entries),
    )


def issue_from_record(record: dict) -> RawIssue:
    """Public record -> RawIssue conversion; raises ValueError on bad input."""
    return _issue_from_record(record)


def issue_to_record(issue: RawIssue) -> dict:
    """Inverse of issue_from_record; timestamps in ISO-8601 UTC."""
    return {
        "key": issue.key,
        "project": issue.project,
        "summary": issue.summary,
        "description": issue.description,
        "priority": issue.priority,
        "issue_type": issue.issue_type,
        "status": issue.status,
        "resolution": issue.resolution,
        "assignee": issue.assignee,
        "components": list(issue.components),
        "labels": list(issue.labels),
        "created_at": issue.created_at.isoformat(),
        "changelog": [
            {
                "at": entry.at.isoformat(),
                "field": entry.field,
                "from": entry.from_value,
                "to": entry.to_value,
            }
            for entry in issue.changelog
        ],
    }


def parse_issue_dump(path: str | Path, strict: bool = False) -> tuple[list[RawIssue], ParseReport]:
    """Read a JSONL dump into RawIssues, in file order.

    In strict mode any malformed line or bad record raises ParseError with
    its line number; otherwise the line is skipped and counted in the report.
    Duplicate keys keep the first occurrence.
    """
    report = ParseReport()
    issues: list[RawIssue] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            report.total_lines += 1
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("line is not a JSON object")
                issue = _issue_from_record(record)
                if issue.key in seen:
                    raise ValueError(f"duplicate key {issue.key!r}")
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                if strict:
                    raise ParseError(line_no, str(exc)) from exc
                report.skipped.append((line_no, str(exc)))
                continue
            seen.add(issue.key)
            issues.append(issue)
            report.parsed += 1
    return issues, report


def filter_issues(
    issues: Iterable[RawIssue], cfg: FilterConfig | None = None
) -> tuple[list[RawIssue], Counter[str]]:
    """Apply quality filters; returns (kept, rejection counts by reason).

    Field-presence filters run first; the per-assignee history threshold is
    then computed over the survivors, so the count reflects usable history.
    Each rejected issue is counted under exactly one reason.
    """
    cfg = cfg or FilterConfig()
    report: Counter[str] = Counter()
    survivors: list[RawIssue] = []
    for issue in issues:
        reason = _field_rejection(issue, cfg)
        if reason is None:
            survivors.append(issue)
        else:
            report[reason] += 1

    counts = Counter(i.assignee for i in survivors if i.assignee is not None)
    kept: list[RawIssue] = []
    for issue in survivors:
        if issue.assignee is not None and counts[issue.assignee] < cfg.min_issues_per_assignee:
            report["assignee_below_threshold"] += 1
        else:
            kept.append(issue)
    return kept, report


def _field_rejection(issue: RawIssue, cfg: FilterConfig) -> str | None:
    if cfg.require_resolved and not issue.resolution:
        return "unresolved"
    if cfg.require_assignee and not issue.assignee:
        return "unassigned"
    if cfg.require_component and issue.primary_component() is None:
        return "missing_component"
    if cfg.require_label and issue.primary_label() is None:
        return "missing_label"
    return None
