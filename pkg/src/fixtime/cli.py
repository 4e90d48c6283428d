"""Command-line orchestration of the full pipeline.

Exit codes: 0 success, 1 I/O or parse abort (and other pipeline errors),
2 empty corpus after filtering/labeling.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from fixtime.bundle import Bundle, load_bundle, save_bundle
from fixtime.config import ProjectConfig, load_config, save_config
from fixtime.ensemble import explain, predict, train_pipeline
from fixtime.errors import CorpusEmpty, FixtimeError
from fixtime.evaluation import evaluate_seeds, insights, write_insights_csv
from fixtime.ingest import filter_issues, issue_from_record, parse_issue_dump
from fixtime.lifecycle import CATEGORY_SLUGS, label_corpus, load_corpus, save_corpus
from fixtime.textproc import DocVector
from fixtime.topics import assign_topic

DEFAULT_ADDR = "127.0.0.1:8571"


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CorpusEmpty as exc:
            _fail(str(exc), code=2)
        except FixtimeError as exc:
            _fail(str(exc), code=1)
        except (OSError, ValueError) as exc:
            _fail(str(exc), code=1)

    return wrapper


def _load_project_config(path: str | None) -> ProjectConfig:
    return load_config(path) if path else ProjectConfig()


def _outfile(path: str) -> str:
    """Create missing parent directories so --out can point anywhere."""
    Path(path).expanduser().resolve().parent.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
def main() -> None:
    """Predict issue resolution-time categories from tracker history."""


@main.command()
@click.option("--dump", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--strict-parse", is_flag=True, help="Abort on the first malformed dump line.")
@_guard
def ingest(dump: str, config_path: str | None, out: str, strict_parse: bool) -> None:
    """Parse a JSONL dump, filter it, label lifecycles, write a corpus file."""
    config = _load_project_config(config_path)
    issues, report = parse_issue_dump(dump, strict=strict_parse)
    kept, rejections = filter_issues(issues, config.filters)
    corpus, excluded = label_corpus(
        kept,
        config.status_map,
        accumulate_active_time=config.accumulate_active_time,
        provenance={"dump": str(dump), "parsed_lines": report.parsed},
    )
    corpus.provenance["rejections"] = dict(sorted(rejections.items()))
    corpus.provenance["excluded"] = dict(sorted(excluded.items()))
    save_corpus(corpus, _outfile(out))

    click.echo(f"parsed {report.parsed} issues ({report.skip_count} lines skipped)")
    for reason, count in sorted(rejections.items()):
        click.echo(f"  rejected {count}: {reason}")
    for reason, count in sorted(excluded.items()):
        click.echo(f"  excluded {count}: {reason}")
    click.echo(f"kept {len(corpus)} labeled issues -> {out}")


def _corpus_topics(model) -> dict[str, int]:
    """Topic id per training key, read off the stored similarity index."""
    index = model.extractor.sim_index
    return {
        key: assign_topic(DocVector(key, index.matrix[i]), model.extractor.topic_model).topic_id
        for i, key in enumerate(index.keys)
    }


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guard
def train(corpus_path: str, config_path: str | None, out: str) -> None:
    """Train the stacked model on a corpus and write a bundle."""
    config = _load_project_config(config_path)
    corpus = load_corpus(corpus_path)
    model = train_pipeline(corpus, config)
    tables = insights(corpus, topics_by_key=_corpus_topics(model))
    bundle = Bundle(
        project=corpus.project,
        model=model,
        insights=tables,
        topic_report=model.extractor.topic_model.report(),
    )
    save_bundle(bundle, _outfile(out))
    click.echo(
        f"trained {corpus.project}: {len(corpus)} issues, "
        f"{model.extractor.topic_model.k} topics -> {out}"
    )


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write reports as JSON.")
@_guard
def evaluate(corpus_path: str, config_path: str | None, seeds: int, out_path: str | None) -> None:
    """Split, train, and score; with --seeds n, aggregate across n splits."""
    config = _load_project_config(config_path)
    corpus = load_corpus(corpus_path)
    seed_list = [config.seed + i for i in range(seeds)]
    reports = evaluate_seeds(corpus, config, seed_list)
    for report in reports:
        click.echo(
            f"seed {report.seed}: accuracy {report.accuracy:.4f} "
            f"f1_macro {report.metrics.f1_macro:.4f} "
            f"f1_weighted {report.metrics.f1_weighted:.4f} "
            f"(n_train {report.n_train}, n_test {report.n_test})"
        )
    if len(reports) > 1:
        acc = np.array([r.accuracy for r in reports])
        f1m = np.array([r.metrics.f1_macro for r in reports])
        click.echo(
            f"mean accuracy {acc.mean():.4f} +/- {acc.std():.4f}; "
            f"mean f1_macro {f1m.mean():.4f} +/- {f1m.std():.4f}"
        )
    solo = reports[-1].view_accuracies
    click.echo("view accuracies (last seed): " + ", ".join(f"{k} {v:.3f}" for k, v in sorted(solo.items())))
    if out_path:
        Path(_outfile(out_path)).write_text(
            json.dumps([r.to_dict() for r in reports], indent=2) + "\n", encoding="utf-8"
        )


@main.command("predict")
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--issue", "issue_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--explain", "with_explain", is_flag=True, help="Print the per-view narrative.")
@_guard
def predict_cmd(bundle_path: str, issue_path: str, with_explain: bool) -> None:
    """Predict the resolution-time category for one issue JSON file."""
    bundle = load_bundle(bundle_path)
    record = json.loads(Path(issue_path).read_text(encoding="utf-8"))
    if not isinstance(record, dict):
        _fail("issue file must contain a JSON object")
    record.setdefault("project", bundle.project)
    record.setdefault("key", "DRAFT")
    record.setdefault("created_at", "1970-01-01T00:00:00+00:00")
    issue = issue_from_record(record)

    prediction = predict(bundle.model, issue)
    click.echo(f"{issue.key}: {prediction.predicted.display} ({prediction.predicted.slug})")
    for slug, prob in zip(CATEGORY_SLUGS, prediction.final_probs):
        click.echo(f"  {slug}: {prob:.4f}")
    if with_explain:
        explanation = explain(bundle.model, prediction)
        click.echo("per-view breakdown:")
        for name in bundle.model.view_names:
            category, prob = explanation.per_view_top[name]
            mark = "*" if name in explanation.agreement_flags else " "
            click.echo(f" {mark}{name}: {category.slug} {prob:.4f} | {explanation.narratives[name]}")


@main.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_guard
def topics(bundle_path: str) -> None:
    """Print the topic report of a trained bundle."""
    report = load_bundle(bundle_path).topic_report
    click.echo(f"{report['k']} topics")
    for topic in report["topics"]:
        words = ", ".join(token for token, _ in topic["keywords"])
        click.echo(f"  topic {topic['id']} ({topic['size']} issues): {words}")


@main.command("insights")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bundle", "bundle_path", type=click.Path(exists=True, dir_okay=False),
              help="Adds the per-topic table (needs a trained model).")
@click.option("--out-csv", "out_csv", type=click.Path(file_okay=False))
@_guard
def insights_cmd(corpus_path: str, bundle_path: str | None, out_csv: str | None) -> None:
    """Print category cross-tabs; optionally write plot-ready CSVs."""
    corpus = load_corpus(corpus_path)
    topics_by_key = None
    if bundle_path:
        topics_by_key = _corpus_topics(load_bundle(bundle_path).model)
    tables = insights(corpus, topics_by_key=topics_by_key)
    for name, table in tables.tables().items():
        click.echo(f"{name} ({tables.total} issues)")
        for row, counts in table.items():
            click.echo(f"  {row}: " + " ".join(str(c) for c in counts))
    if out_csv:
        for path in write_insights_csv(tables, out_csv):
            click.echo(f"wrote {path}")


@main.command()
@click.option("--bundles", "bundles_dir", required=True, envvar="FIXTIME_BUNDLES",
              type=click.Path(exists=True, file_okay=False))
@click.option("--addr", default=DEFAULT_ADDR, show_default=True, envvar="FIXTIME_ADDR")
@click.option("--cors", "cors_origins", multiple=True, help="Allowed CORS origin (repeatable).")
@_guard
def serve(bundles_dir: str, addr: str, cors_origins: tuple[str, ...]) -> None:
    """Serve loaded bundles over HTTP."""
    import uvicorn

    from fixtime.serve import create_app

    host, _, port = addr.partition(":")
    if not port.isdigit():
        _fail(f"--addr must be host:port, got {addr!r}")
    app = create_app(bundles_dir, cors_origins=cors_origins)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.command("init-config")
@click.option("--out", default="fixtime.json", show_default=True, type=click.Path(dir_okay=False))
@_guard
def init_config(out: str) -> None:
    """Write a config template populated with every default."""
    save_config(ProjectConfig(), _outfile(out))
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
