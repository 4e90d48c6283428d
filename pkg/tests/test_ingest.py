"""Dump parsing and per-project quality filters."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest

from fixtime.errors import ParseError
from fixtime.ingest import (
    FilterConfig,
    filter_issues,
    issue_from_record,
    issue_to_record,
    parse_issue_dump,
    parse_timestamp,
)

RECORD = {
    "key": "DEMO-1",
    "project": "DEMO",
    "summary": "NPE in allocator",
    "description": "stack trace attached",
    "priority": "Major",
    "issue_type": "Bug",
    "status": "Closed",
    "resolution": "Fixed",
    "assignee": "alice",
    "components": ["core"],
    "labels": ["crash"],
    "created_at": "2024-01-01T00:00:00Z",
    "changelog": [
        {"at": "2024-01-03T00:00:00Z", "field": "status", "from": "In Progress", "to": "Resolved"},
        {"at": "2024-01-02T00:00:00Z", "field": "status", "from": "Open", "to": "In Progress"},
    ],
}


def _dump(tmp_path, records):
    path = tmp_path / "dump.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records), encoding="utf-8")
    return path


class TestParseTimestamp:
    def test_z_suffix(self):
        ts = parse_timestamp("2024-06-01T12:00:00Z")
        assert ts == datetime(2024, 6, 1, 12, tzinfo=timezone.utc)

    def test_numeric_offset_normalized_to_utc(self):
        ts = parse_timestamp("2024-06-01T14:00:00+02:00")
        assert ts == datetime(2024, 6, 1, 12, tzinfo=timezone.utc)

    def test_naive_assumed_utc(self):
        ts = parse_timestamp("2024-06-01T12:00:00")
        assert ts.tzinfo == timezone.utc

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_timestamp("last tuesday")
        with pytest.raises(ValueError):
            parse_timestamp(12345)


class TestParseDump:
    def test_happy_record(self, tmp_path):
        issues, report = parse_issue_dump(_dump(tmp_path, [RECORD]))
        assert report.parsed == 1 and report.skip_count == 0
        issue = issues[0]
        assert issue.key == "DEMO-1"
        assert issue.components == ("core",)
        assert issue.assignee == "alice"
        # changelog comes back sorted by timestamp regardless of input order
        assert [e.to_value for e in issue.changelog] == ["In Progress", "Resolved"]

    def test_unknown_fields_ignored(self, tmp_path):
        record = dict(RECORD, watchers=42, votes=[1, 2])
        issues, _ = parse_issue_dump(_dump(tmp_path, [record]))
        assert issues[0].key == "DEMO-1"

    def test_missing_required_field_skipped_and_counted(self, tmp_path):
        record = {k: v for k, v in RECORD.items() if k != "key"}
        issues, report = parse_issue_dump(_dump(tmp_path, [record, RECORD]))
        assert len(issues) == 1
        assert report.skip_count == 1

    def test_strict_mode_raises(self, tmp_path):
        path = _dump(tmp_path, [RECORD])
        with path.open("a", encoding="utf-8") as fh:
            fh.write("\nnot json at all")
        with pytest.raises(ParseError):
            parse_issue_dump(path, strict=True)
        issues, report = parse_issue_dump(path, strict=False)
        assert len(issues) == 1 and report.skip_count == 1

    def test_blank_lines_skipped_silently(self, tmp_path):
        path = tmp_path / "dump.jsonl"
        path.write_text("\n" + json.dumps(RECORD) + "\n\n", encoding="utf-8")
        issues, report = parse_issue_dump(path)
        assert len(issues) == 1 and report.skip_count == 0

    def test_record_round_trip(self):
        issue = issue_from_record(RECORD)
        assert issue_from_record(issue_to_record(issue)) == issue


def _mk(key="X-1", assignee="alice", resolution="Fixed", components=("core",), labels=("bug",)):
    return issue_from_record(
        dict(
            RECORD,
            key=key,
            assignee=assignee,
            resolution=resolution,
            components=list(components),
            labels=list(labels),
        )
    )


class TestFilters:
    def test_field_requirements(self):
        issues = [
            _mk("A-1"),
            _mk("A-2", resolution=None),
            _mk("A-3", assignee=None),
            _mk("A-4", components=()),
            _mk("A-5", labels=()),
        ]
        kept, rejections = filter_issues(issues, FilterConfig(min_issues_per_assignee=1))
        assert [i.key for i in kept] == ["A-1"]
        assert rejections["unresolved"] == 1
        assert rejections["unassigned"] == 1
        assert rejections["missing_component"] == 1
        assert rejections["missing_label"] == 1

    def test_assignee_threshold_counts_survivors_only(self):
        # bob has 3 issues but one is unresolved, so only 2 survive phase one
        issues = [_mk(f"B-{i}", assignee="bob") for i in range(2)]
        issues.append(_mk("B-9", assignee="bob", resolution=None))
        issues += [_mk(f"C-{i}", assignee="carol") for i in range(3)]
        kept, rejections = filter_issues(issues, FilterConfig(min_issues_per_assignee=3))
        assert sorted(i.key for i in kept) == ["C-0", "C-1", "C-2"]
        assert rejections["assignee_below_threshold"] == 2

    def test_default_threshold_is_twenty(self):
        config = FilterConfig()
        assert config.min_issues_per_assignee == 20
        issues = [_mk(f"D-{i}") for i in range(19)]
        kept, rejections = filter_issues(issues, config)
        assert kept == [] and rejections["assignee_below_threshold"] == 19

    def test_unassigned_passes_when_not_required(self):
        issues = [_mk(f"E-{i}") for i in range(20)] + [_mk("E-x", assignee=None)]
        config = FilterConfig(require_assignee=False, min_issues_per_assignee=20)
        kept, _ = filter_issues(issues, config)
        assert "E-x" in {i.key for i in kept}
