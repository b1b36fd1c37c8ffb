"""Command-line entry point: ``trialsumm fetch | summarize | metrics``.

Every subcommand accepts ``--config FILE`` (JSON object whose keys are the
long option names with dashes or underscores); explicit flags win over the
file. Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Sequence

from .batching import BudgetPolicy
from .ingest import DEFAULT_BASE_URL, IngestError, Query, RegistryClient, load_corpus, save_corpus
from .llm_backend import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_ENDPOINT,
    DEFAULT_MODEL,
    MOCK_MODEL,
    BackendError,
    HttpBackend,
    MissingCredential,
    MockBackend,
)
from .metrics import EmptyInput, EmptyText, build_metrics_report, rouge_l_f1_text
from .pipeline import CascadeDepthExceeded, PipelineConfig, summarize_corpus
from .trial_model import Corpus, MedicalField, RecencyClass, exclusion_reason, select_recency

logger = logging.getLogger("trialsumm")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# Option defaults live here rather than in argparse so a config file can sit between them and the flags.
DEFAULTS: dict[str, dict[str, Any]] = {
    "fetch": {
        "max_records": 1000,
        "page_size": 100,
        "base_url": DEFAULT_BASE_URL,
        "field": "other",
        "device": None,
        "recency": None,
        "reference_date": None,
        "labels": None,
    },
    "summarize": {
        "backend": "mock",
        "model": None,
        "endpoint": DEFAULT_ENDPOINT,
        "api_key_env": DEFAULT_API_KEY_ENV,
        "cache_dir": None,
        "out": None,
        "report": None,
        "concurrency": 4,
        "batch_size": 15,
        "words_per_trial": 13,
        "full_batch_words": 200,
        "combine_min_words": 150,
        "combine_max_words": 250,
        "token_limit": 4096,
        "max_depth": 4,
        "fan_in": None,
        "temperature": 0.0,
        "reprompt": False,
    },
    "metrics": {
        "summary": [],
        "record": [],
        "corpus_size": None,
        "sources": [],
        "rouge": None,
        "out": None,
    },
}


class ConfigError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trialsumm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download registry records into a corpus file")
    p.add_argument("--config", type=Path)
    p.add_argument("--query", help="registry search expression, e.g. a device name")
    p.add_argument("--out", type=Path, help="corpus file to write (line-delimited JSON)")
    p.add_argument("--max-records", type=int)
    p.add_argument("--page-size", type=int)
    p.add_argument("--base-url")
    p.add_argument("--device", help="device name recorded in the corpus (default: the query)")
    p.add_argument("--field", help="medical field; with --labels, keeps only trials labelled with it")
    p.add_argument("--labels", type=Path, help='JSON object {"NCT...": ["oncology", ...]}')
    p.add_argument("--recency", choices=[RecencyClass.COMPLETED_WITHIN_5Y.value, RecencyClass.NEW_WITHIN_2Y.value])
    p.add_argument("--reference-date", help="YYYY-MM-DD used for recency windows (default: today)")

    p = sub.add_parser("summarize", help="run the summarization cascade over a corpus file")
    p.add_argument("--config", type=Path)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--api-key-env", help="name of the environment variable holding the API key")
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--out", type=Path, help="summary document (text)")
    p.add_argument("--report", type=Path, help="run record (JSON)")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--words-per-trial", type=int)
    p.add_argument("--full-batch-words", type=int)
    p.add_argument("--combine-min-words", type=int)
    p.add_argument("--combine-max-words", type=int)
    p.add_argument("--token-limit", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--fan-in", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--reprompt", action="store_true", default=None, help="re-prompt once when out of word range")

    p = sub.add_parser("metrics", help="evaluation metrics for summaries")
    p.add_argument("--config", type=Path)
    p.add_argument("--summary", type=Path, action="append", help="summary text file (repeatable)")
    p.add_argument("--record", type=Path, action="append", help="run record JSON from summarize (repeatable)")
    p.add_argument("--corpus-size", type=int, help="corpus size for --summary files")
    p.add_argument("--sources", type=Path, action="append", help="corpus file whose descriptions are the readability baseline")
    p.add_argument("--rouge", nargs=2, type=Path, metavar=("REF", "CAND"), help="print ROUGE-L F1 of CAND against REF")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    return parser


def _effective(command: str, args: argparse.Namespace) -> dict[str, Any]:
    settings = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            settings[key.replace("-", "_")] = value
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        settings[key] = value
    return settings


def _require(settings: dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if not settings.get(k)]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _jsonable(settings: dict[str, Any]) -> dict[str, Any]:
    return {k: str(v) if isinstance(v, Path) else v for k, v in settings.items()}


# -- fetch -------------------------------------------------------------------


def cmd_fetch(settings: dict[str, Any]) -> int:
    _require(settings, "query", "out")
    query = Query(settings["query"], page_size=int(settings["page_size"]))
    client = RegistryClient(settings["base_url"])
    try:
        trials = client.fetch_all(query, int(settings["max_records"]))
    finally:
        client.close()

    field = MedicalField(settings["field"])
    if settings.get("labels"):
        labels = json.loads(Path(settings["labels"]).read_text(encoding="utf-8"))
        trials = [dataclasses.replace(t, field_labels=tuple(labels.get(t.id, ()))) for t in trials]

    attrition: Counter[str] = Counter()
    kept = []
    for trial in trials:
        reason = exclusion_reason(trial)
        if reason:
            attrition[reason] += 1
        else:
            kept.append(trial)
    if settings.get("labels"):
        before = len(kept)
        kept = [t for t in kept if field in t.field_labels]
        attrition["other_field"] += before - len(kept)
    recency = RecencyClass(settings["recency"]) if settings.get("recency") else None
    if recency is not None:
        ref = dt.date.fromisoformat(settings["reference_date"]) if settings.get("reference_date") else dt.date.today()
        before = len(kept)
        kept = select_recency(kept, recency, ref)
        attrition["outside_recency_window"] += before - len(kept)

    corpus = Corpus(settings.get("device") or settings["query"], field, recency, tuple(kept))
    save_corpus(corpus, settings["out"])

    print(f"fetched {len(trials)} trials, kept {len(kept)} -> {settings['out']}")
    for reason in ("withdrawn", "enrollment_below_50", "summary_missing", "other_field", "outside_recency_window"):
        if reason in attrition or reason in ("withdrawn", "enrollment_below_50", "summary_missing"):
            print(f"  dropped {reason:<24} {attrition[reason]:>5}")
    return EXIT_OK


# -- summarize ---------------------------------------------------------------


def _make_backend(settings: dict[str, Any]):
    token_limit = int(settings["token_limit"])
    if settings["backend"] == "mock":
        return MockBackend(settings.get("model") or MOCK_MODEL, token_limit=token_limit)
    try:
        return HttpBackend(
            settings["endpoint"],
            settings.get("model") or DEFAULT_MODEL,
            api_key_env=settings["api_key_env"],
            token_limit=token_limit,
        )
    except MissingCredential as exc:
        raise ConfigError(str(exc)) from exc


def _pipeline_config(settings: dict[str, Any]) -> tuple[BudgetPolicy, PipelineConfig]:
    policy = BudgetPolicy(
        batch_size=int(settings["batch_size"]),
        words_per_trial=int(settings["words_per_trial"]),
        full_batch_words=int(settings["full_batch_words"]),
        combine_min_words=int(settings["combine_min_words"]),
        combine_max_words=int(settings["combine_max_words"]),
        token_limit=int(settings["token_limit"]),
    )
    config = PipelineConfig(
        policy=policy,
        reduce_fan_in=settings.get("fan_in"),
        max_cascade_depth=int(settings["max_depth"]),
        concurrency_limit=int(settings["concurrency"]),
        cache_dir=str(settings["cache_dir"]) if settings.get("cache_dir") else None,
        temperature=float(settings["temperature"]),
        reprompt_on_word_range=bool(settings["reprompt"]),
    )
    return policy, config


def cmd_summarize(settings: dict[str, Any]) -> int:
    _require(settings, "corpus")
    backend = _make_backend(settings)
    try:
        _policy, config = _pipeline_config(settings)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    corpus = load_corpus(settings["corpus"])
    record = summarize_corpus(corpus, config, backend)
    record.config["run"] = _jsonable(settings)

    out = Path(settings["out"]) if settings.get("out") else Path(settings["corpus"]).with_suffix(".summary.txt")
    report = Path(settings["report"]) if settings.get("report") else out.with_suffix(".json")
    out.write_text(record.document(), encoding="utf-8")
    report.write_text(record.to_json(), encoding="utf-8")

    print(f"llm calls: {record.llm_call_count}")
    print(f"coverage: {record.coverage_fraction:.3f} ({len({c.index for c in record.final.citations})}/{len(corpus)} trials cited)")
    print(f"hallucination events: {len(record.hallucination_events)}")
    for event in record.hallucination_events:
        print(f"  {event}")
    if record.word_range_deviation:
        print(f"word range deviation: {record.word_range_deviation}")
    print(f"wrote {out} and {report}")
    return EXIT_OK


# -- metrics -----------------------------------------------------------------


def _read_summary(path: Path) -> str:
    text = path.read_text(encoding="utf-8")
    # documents written by `summarize` end with a reference list
    return text.split("\n\nReferences:\n", 1)[0].strip()


def cmd_metrics(settings: dict[str, Any]) -> int:
    if settings.get("rouge"):
        ref_path, cand_path = (Path(p) for p in settings["rouge"])
        score = rouge_l_f1_text(ref_path.read_text(encoding="utf-8"), cand_path.read_text(encoding="utf-8"))
        print(json.dumps({"rouge_l_f1": score}, sort_keys=True))
        return EXIT_OK

    summaries: list[tuple[str, int | None]] = []
    for path in settings.get("record") or []:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        summaries.append((data["text"], data["corpus_size"]))
    size = settings.get("corpus_size")
    for path in settings.get("summary") or []:
        summaries.append((_read_summary(Path(path)), int(size) if size else None))
    if not summaries:
        raise ConfigError("give at least one --summary or --record, or use --rouge")
    sources = [t.brief_summary for path in settings.get("sources") or [] for t in load_corpus(path).trials]

    report = build_metrics_report(summaries, sources)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if settings.get("out"):
        Path(settings["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"fetch": cmd_fetch, "summarize": cmd_summarize, "metrics": cmd_metrics}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _effective(args.command, args)
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"trialsumm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EmptyInput, EmptyText) as exc:
        print(f"trialsumm {args.command}: EmptyInput: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, IngestError, BackendError, CascadeDepthExceeded, ValueError) as exc:
        print(f"trialsumm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
