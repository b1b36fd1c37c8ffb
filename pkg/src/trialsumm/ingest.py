"""ClinicalTrials.gov v2 ingestion and line-delimited JSON corpus storage.

Store layout: the first line is a header record carrying corpus metadata,
every following line is one trial::

    {"device": "Fitbit", "field": "oncology", "record": "corpus", "recency": null, "schema_version": 1}
    {"brief_summary": "...", "id": "NCT01234567", ...}
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import httpx

from .retry import MAX_ATTEMPTS, call_with_retry
from .trial_model import Corpus, MedicalField, RecencyClass, Trial, TrialStatus

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://clinicaltrials.gov"
STUDIES_PATH = "/api/v2/studies"
SCHEMA_VERSION = 1
MAX_IN_FLIGHT = 2

_STATUS_MAP = {
    "RECRUITING": TrialStatus.RECRUITING,
    "ACTIVE_NOT_RECRUITING": TrialStatus.ACTIVE,
    "ENROLLING_BY_INVITATION": TrialStatus.ACTIVE,
    "NOT_YET_RECRUITING": TrialStatus.ACTIVE,
    "COMPLETED": TrialStatus.COMPLETED,
    "WITHDRAWN": TrialStatus.WITHDRAWN,
}


class IngestError(Exception):
    pass


class NetworkError(IngestError):
    """Transport-level failure talking to the registry; retryable."""


class ApiError(IngestError):
    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"registry returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class SchemaError(IngestError):
    """A study record lacks a field the mapping requires."""


class ParseError(IngestError):
    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Query:
    search_expression: str
    page_size: int = 100
    page_token: str | None = None

    def __post_init__(self) -> None:
        if not self.search_expression.strip():
            raise ValueError("search_expression must be non-empty")
        if not 1 <= self.page_size <= 1000:
            raise ValueError(f"page_size must be in [1, 1000], got {self.page_size}")


@dataclass(frozen=True)
class StudyPage:
    trials: list[Trial]
    next_page_token: str | None = None
    total_count: int | None = None


def parse_registry_date(value: str | None) -> dt.date | None:
    """Registry dates come as ``YYYY-MM-DD`` or ``YYYY-MM``; month-only dates map to the 1st."""
    if not value:
        return None
    parts = value.split("-")
    try:
        if len(parts) == 3:
            return dt.date(int(parts[0]), int(parts[1]), int(parts[2]))
        if len(parts) == 2:
            return dt.date(int(parts[0]), int(parts[1]), 1)
        if len(parts) == 1:
            return dt.date(int(parts[0]), 1, 1)
    except ValueError:
        pass
    logger.warning("unparseable registry date %r", value)
    return None


def study_to_trial(study: dict[str, Any]) -> Trial:
    """Map one study object from the v2 API onto a :class:`Trial`."""
    proto = study.get("protocolSection") or {}
    ident = proto.get("identificationModule") or {}
    nct_id = ident.get("nctId")
    if not nct_id:
        raise SchemaError("study record has no identificationModule.nctId")
    status_mod = proto.get("statusModule") or {}
    desc = proto.get("descriptionModule") or {}
    design = proto.get("designModule") or {}
    conditions = (proto.get("conditionsModule") or {}).get("conditions") or []

    raw_status = status_mod.get("overallStatus")
    status = _STATUS_MAP.get((raw_status or "").upper(), TrialStatus.OTHER)
    enrollment = (design.get("enrollmentInfo") or {}).get("count")

    return Trial(
        id=nct_id,
        title=(ident.get("briefTitle") or "").strip(),
        brief_summary=(desc.get("briefSummary") or "").strip(),
        status=status,
        enrollment=int(enrollment) if enrollment is not None else None,
        start_date=parse_registry_date((status_mod.get("startDateStruct") or {}).get("date")),
        completion_date=parse_registry_date((status_mod.get("primaryCompletionDateStruct") or {}).get("date")),
        conditions=tuple(conditions),
        raw_status=raw_status,
    )


def _retryable(exc: BaseException) -> bool:
    if isinstance(exc, NetworkError):
        return True
    return isinstance(exc, ApiError) and (exc.status == 429 or exc.status >= 500)


class RegistryClient:
    """HTTP client for the registry with retry and an in-flight request cap."""

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        *,
        http: httpx.Client | None = None,
        timeout: float = 30.0,
        max_attempts: int = MAX_ATTEMPTS,
        sleep: Callable[[float], None] | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.http = http or httpx.Client(timeout=timeout)
        self.max_attempts = max_attempts
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(MAX_IN_FLIGHT)

    def _get_once(self, params: dict[str, Any]) -> dict[str, Any]:
        with self._slots:
            try:
                response = self.http.get(self.base_url + STUDIES_PATH, params=params)
            except httpx.TransportError as exc:
                raise NetworkError(str(exc)) from exc
        if response.status_code // 100 != 2:
            raise ApiError(response.status_code, response.text)
        try:
            return response.json()
        except ValueError as exc:
            raise ApiError(response.status_code, f"invalid JSON: {exc}") from exc

    def fetch_page(self, query: Query) -> StudyPage:
        params: dict[str, Any] = {
            "query.term": query.search_expression,
            "pageSize": query.page_size,
            "countTotal": "true",
            "format": "json",
        }
        if query.page_token:
            params["pageToken"] = query.page_token
        kwargs = {"sleep": self._sleep} if self._sleep is not None else {}
        payload = call_with_retry(
            lambda: self._get_once(params), _retryable, max_attempts=self.max_attempts, **kwargs
        )
        trials = [study_to_trial(s) for s in payload.get("studies") or []]
        return StudyPage(
            trials=trials,
            next_page_token=payload.get("nextPageToken") or None,
            total_count=payload.get("totalCount"),
        )

    def fetch_all(self, query: Query, max_records: int) -> list[Trial]:
        if max_records < 1:
            raise ValueError("max_records must be >= 1")
        out: list[Trial] = []
        seen: set[str] = set()
        token = query.page_token
        while len(out) < max_records:
            page = self.fetch_page(Query(query.search_expression, query.page_size, token))
            for trial in page.trials:
                if trial.id in seen:
                    logger.warning("duplicate study %s across pages; keeping first occurrence", trial.id)
                    continue
                seen.add(trial.id)
                out.append(trial)
                if len(out) == max_records:
                    break
            token = page.next_page_token
            if not token:
                break
        return out

    def close(self) -> None:
        self.http.close()


def fetch_page(query: Query, client: RegistryClient | None = None) -> StudyPage:
    return (client or RegistryClient()).fetch_page(query)


def fetch_all(query: Query, max_records: int, client: RegistryClient | None = None) -> list[Trial]:
    return (client or RegistryClient()).fetch_all(query, max_records)


# -- persistence -----------------------------------------------------------


def trial_to_dict(trial: Trial) -> dict[str, Any]:
    return {
        "id": trial.id,
        "title": trial.title,
        "brief_summary": trial.brief_summary,
        "status": trial.status.value,
        "raw_status": trial.raw_status,
        "enrollment": trial.enrollment,
        "start_date": trial.start_date.isoformat() if trial.start_date else None,
        "completion_date": trial.completion_date.isoformat() if trial.completion_date else None,
        "conditions": list(trial.conditions),
        "field_labels": [f.name for f in trial.field_labels],
    }


def trial_from_dict(data: dict[str, Any]) -> Trial:
    def date(key: str) -> dt.date | None:
        value = data.get(key)
        return dt.date.fromisoformat(value) if value else None

    return Trial(
        id=data["id"],
        title=data["title"],
        brief_summary=data["brief_summary"],
        status=TrialStatus(data["status"]),
        enrollment=data.get("enrollment"),
        start_date=date("start_date"),
        completion_date=date("completion_date"),
        conditions=tuple(data.get("conditions") or ()),
        field_labels=tuple(MedicalField(n) for n in data.get("field_labels") or ()),
        raw_status=data.get("raw_status"),
    )


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def save_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    """Write ``corpus`` atomically (temp file + rename)."""
    path = Path(path)
    header = {
        "record": "corpus",
        "schema_version": SCHEMA_VERSION,
        "device": corpus.device,
        "field": corpus.field.name,
        "recency": corpus.recency.value if corpus.recency else None,
    }
    lines = [_dumps(header)] + [_dumps(trial_to_dict(t)) for t in corpus.trials]
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_corpus(path: str | os.PathLike) -> Corpus:
    header: dict[str, Any] | None = None
    trials: list[Trial] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(lineno, "expected a JSON object")
            if header is None:
                if record.get("record") != "corpus":
                    raise ParseError(lineno, "first line must be the corpus header record")
                if record.get("schema_version") != SCHEMA_VERSION:
                    raise ParseError(lineno, f"unsupported schema_version {record.get('schema_version')!r}")
                header = record
                continue
            try:
                trials.append(trial_from_dict(record))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(lineno, f"bad trial record: {exc}") from exc
    if header is None:
        raise ParseError(1, "missing corpus header")
    try:
        return Corpus(
            device=header["device"],
            field=MedicalField(header["field"]),
            recency=RecencyClass(header["recency"]) if header.get("recency") else None,
            trials=tuple(trials),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(1, f"bad corpus header: {exc}") from exc
