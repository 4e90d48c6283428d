"""On-disk model bundles: one JSON document per trained project.

A bundle carries the full StackedModel plus the descriptive artifacts the
service exposes (insight tables and the topic report). The model document
round-trips losslessly: floats are serialized with Python's shortest
round-trip repr, so a reloaded bundle predicts bit-for-bit identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fixtime.ensemble import StackedModel
from fixtime.errors import BundleError
from fixtime.evaluation import InsightTables

__all__ = ["BUNDLE_VERSION", "Bundle", "save_bundle", "load_bundle", "load_bundle_dir"]

BUNDLE_VERSION = 1


@dataclass
class Bundle:
    project: str
    model: StackedModel
    insights: InsightTables
    topic_report: dict

    def to_dict(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "project": self.project,
            "model": self.model.to_dict(),
            "insights": self.insights.to_dict(),
            "topic_report": self.topic_report,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Bundle:
        if not isinstance(data, dict) or data.get("version") != BUNDLE_VERSION:
            raise BundleError(f"unsupported bundle version {data.get('version')!r}")
        try:
            return cls(
                project=data["project"],
                model=StackedModel.from_dict(data["model"]),
                insights=InsightTables.from_dict(data["insights"]),
                topic_report=data["topic_report"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"malformed bundle: {exc}") from exc


def save_bundle(bundle: Bundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle.to_dict()) + "\n", encoding="utf-8")


def load_bundle(path: str | Path) -> Bundle:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle {path} is not valid JSON: {exc}") from exc
    return Bundle.from_dict(data)


def load_bundle_dir(directory: str | Path) -> dict[str, Bundle]:
    """All *.json bundles in a directory, keyed by project id."""
    loaded: dict[str, Bundle] = {}
    for path in sorted(Path(directory).glob("*.json")):
        bundle = load_bundle(path)
        loaded[bundle.project] = bundle
    return loaded
