"""HTTP service over trained model bundles.

Endpoints (all JSON):

    GET  /projects                      loaded project ids
    GET  /projects/{id}/metadata        selector values for building a draft
    POST /projects/{id}/predict         prediction + per-view decomposition
    POST /projects/{id}/whatif          baseline vs overridden prediction
    GET  /projects/{id}/insights        category cross-tabs
    GET  /projects/{id}/topics          topic keyword report

Bundles load once at startup and are immutable afterwards, so identical
request bodies always produce identical responses. Probabilities are rounded
to 4 decimals in transport only; the predicted label is computed before
rounding and transmitted explicitly. Errors use `{"error": str}` with an
optional `"fields"` list for request-body problems.
"""

from __future__ import annotations

from typing import Any, Mapping

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from fixtime.bundle import Bundle, load_bundle_dir
from fixtime.ensemble import (
    OVERRIDABLE_FIELDS,
    Explanation,
    Prediction,
    StackedModel,
    explain,
    predict,
    whatif,
)
from fixtime.errors import OverrideError
from fixtime.ingest import RawIssue, issue_from_record
from fixtime.lifecycle import CATEGORY_SLUGS, ResolutionCategory

__all__ = ["create_app"]

TRANSPORT_DIGITS = 4

_DRAFT_DEFAULTS = {
    "key": "DRAFT",
    "created_at": "1970-01-01T00:00:00+00:00",
}


class _BadRequest(Exception):
    def __init__(self, message: str, fields: list[str]):
        super().__init__(message)
        self.message = message
        self.fields = fields


def _error(status: int, message: str, fields: list[str] | None = None) -> JSONResponse:
    body: dict[str, Any] = {"error": message}
    if fields:
        body["fields"] = fields
    return JSONResponse(status_code=status, content=body)


def _issue_from_payload(project: str, payload: Any) -> RawIssue:
    """Build a predictable issue from a request body; drafts need no key."""
    if not isinstance(payload, Mapping):
        raise _BadRequest("request body must be a JSON object", [])
    record = dict(payload)
    fields: list[str] = []
    if not str(record.get("summary") or "").strip():
        fields.append("summary")
    for name in ("components", "labels", "changelog"):
        if name in record and record[name] is not None and not isinstance(record[name], list):
            fields.append(name)
    if fields:
        raise _BadRequest("missing or invalid issue fields", fields)
    record.setdefault("project", project)
    for name, default in _DRAFT_DEFAULTS.items():
        if not record.get(name):
            record[name] = default
    try:
        return issue_from_record(record)
    except (ValueError, TypeError) as exc:
        raise _BadRequest(f"invalid issue body: {exc}", []) from exc


def _round_probs(probs) -> dict[str, float]:
    return {
        slug: round(float(p), TRANSPORT_DIGITS) for slug, p in zip(CATEGORY_SLUGS, probs)
    }


def _prediction_payload(model: StackedModel, prediction: Prediction) -> dict:
    explanation = explain(model, prediction)
    return {
        "issue_key": prediction.issue_key,
        "predicted": prediction.predicted.slug,
        "predicted_display": prediction.predicted.display,
        "final_probs": _round_probs(prediction.final_probs),
        "per_view": {
            name: _round_probs(prediction.per_view_probs[name]) for name in model.view_names
        },
        "explanation": _explanation_payload(explanation),
    }


def _explanation_payload(explanation: Explanation) -> dict:
    return {
        "per_view_top": {
            name: {"category": cat.slug, "probability": round(p, TRANSPORT_DIGITS)}
            for name, (cat, p) in explanation.per_view_top.items()
        },
        "agreement_flags": list(explanation.agreement_flags),
        "narratives": dict(explanation.narratives),
    }


def create_app(bundles_dir: str, cors_origins: tuple[str, ...] = ()) -> FastAPI:
    bundles: dict[str, Bundle] = load_bundle_dir(bundles_dir)
    app = FastAPI(title="fixtime", docs_url=None, redoc_url=None)
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _bundle_or_404(project_id: str) -> Bundle | JSONResponse:
        bundle = bundles.get(project_id)
        if bundle is None:
            return _error(404, f"unknown project {project_id!r}")
        return bundle

    @app.get("/projects")
    def list_projects() -> list[dict]:
        return [
            {"id": project, "categories": list(CATEGORY_SLUGS)}
            for project in sorted(bundles)
        ]

    @app.get("/projects/{project_id}/metadata")
    def metadata(project_id: str):
        bundle = _bundle_or_404(project_id)
        if isinstance(bundle, JSONResponse):
            return bundle
        extractor = bundle.model.extractor
        return {
            "project": project_id,
            "priorities": list(extractor.encoders["priority"].values),
            "issue_types": list(extractor.encoders["issue_type"].values),
            "components": list(extractor.encoders["component"].values),
            "labels": list(extractor.encoders["label"].values),
            "assignees": sorted(extractor.profiles),
            "categories": [
                {"slug": c.slug, "display": c.display} for c in ResolutionCategory
            ],
        }

    @app.post("/projects/{project_id}/predict")
    async def predict_issue(project_id: str, request: Request):
        bundle = _bundle_or_404(project_id)
        if isinstance(bundle, JSONResponse):
            return bundle
        try:
            payload = await request.json()
        except Exception:
            return _error(422, "request body is not valid JSON")
        try:
            issue = _issue_from_payload(project_id, payload)
        except _BadRequest as exc:
            return _error(422, exc.message, exc.fields)
        return _prediction_payload(bundle.model, predict(bundle.model, issue))

    @app.post("/projects/{project_id}/whatif")
    async def whatif_issue(project_id: str, request: Request):
        bundle = _bundle_or_404(project_id)
        if isinstance(bundle, JSONResponse):
            return bundle
        try:
            payload = await request.json()
        except Exception:
            return _error(422, "request body is not valid JSON")
        if not isinstance(payload, Mapping) or "issue" not in payload:
            return _error(422, "body must be {\"issue\": {...}, \"overrides\": {...}}", ["issue"])
        overrides = payload.get("overrides") or {}
        if not isinstance(overrides, Mapping):
            return _error(422, "overrides must be an object", ["overrides"])
        try:
            issue = _issue_from_payload(project_id, payload["issue"])
        except _BadRequest as exc:
            return _error(422, exc.message, exc.fields)
        try:
            result = whatif(bundle.model, issue, overrides)
        except OverrideError as exc:
            return _error(422, str(exc), exc.fields)
        return {
            "baseline": _prediction_payload(bundle.model, result.baseline),
            "modified": _prediction_payload(bundle.model, result.modified),
            "delta": _round_probs(result.delta),
            "overridable_fields": sorted(OVERRIDABLE_FIELDS),
        }

    @app.get("/projects/{project_id}/insights")
    def project_insights(project_id: str):
        bundle = _bundle_or_404(project_id)
        if isinstance(bundle, JSONResponse):
            return bundle
        return bundle.insights.to_dict()

    @app.get("/projects/{project_id}/topics")
    def project_topics(project_id: str):
        bundle = _bundle_or_404(project_id)
        if isinstance(bundle, JSONResponse):
            return bundle
        return bundle.topic_report

    return app
