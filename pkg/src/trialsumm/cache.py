"""Content-addressed response cache for completion calls."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path

from .llm_backend import Backend, CompletionRequest, CompletionResponse

logger = logging.getLogger(__name__)


class CacheCorrupt(Exception):
    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"corrupt cache entry {path}: {reason}")
        self.path = path


class CacheMiss(LookupError):
    pass


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def request_identity(request: CompletionRequest) -> dict:
    return {"model_id": request.model_id, "prompt": request.prompt, "temperature": request.temperature}


def cache_key(request: CompletionRequest) -> str:
    canonical = json.dumps(request_identity(request), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return sha256_text(canonical)


class ResponseCache:
    """Responses stored as ``<dir>/<key[:2]>/<key>.json``.

    With ``directory=None`` entries live in memory only. Writes go through a
    temp file and ``os.replace`` so readers never see a partial record.
    """

    def __init__(self, directory: str | os.PathLike | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        self._memory: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def path_for(self, key: str) -> Path:
        assert self.directory is not None
        return self.directory / key[:2] / f"{key}.json"

    def get(self, request: CompletionRequest) -> CompletionResponse | None:
        key = cache_key(request)
        if self.directory is None:
            record = self._memory.get(key)
        else:
            path = self.path_for(key)
            if not path.exists():
                record = None
            else:
                try:
                    record = json.loads(path.read_text(encoding="utf-8"))
                    if record.get("key") != key or record.get("request") != request_identity(request):
                        raise ValueError("key does not match contents")
                    CompletionResponse(**record["response"])
                except (ValueError, KeyError, TypeError, AttributeError) as exc:
                    raise CacheCorrupt(path, str(exc)) from exc
        with self._lock:
            if record is None:
                self.misses += 1
                return None
            self.hits += 1
        return CompletionResponse(**record["response"])

    def put(self, request: CompletionRequest, response: CompletionResponse) -> None:
        key = cache_key(request)
        record = {"key": key, "request": request_identity(request), "response": dataclasses.asdict(response)}
        if self.directory is None:
            self._memory[key] = record
            return
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, sort_keys=True, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def discard(self, request: CompletionRequest) -> None:
        key = cache_key(request)
        self._memory.pop(key, None)
        if self.directory is not None:
            self.path_for(key).unlink(missing_ok=True)


def cached_complete(
    request: CompletionRequest, backend: Backend, cache: ResponseCache | None
) -> tuple[CompletionResponse, bool]:
    """Serve ``request`` from ``cache`` or the backend; returns ``(response, was_hit)``.

    A corrupt entry is logged and dropped, then refetched.
    """
    if cache is not None:
        try:
            hit = cache.get(request)
        except CacheCorrupt as exc:
            logger.warning("%s; refetching", exc)
            cache.discard(request)
            hit = None
        if hit is not None:
            return hit, True
    response = backend.complete(request)
    if cache is not None:
        cache.put(request, response)
    return response, False


class CacheOnlyBackend:
    """Backend that refuses to run; used to replay a run purely from cache."""

    backend_id = "cache-only"

    def __init__(self, model_id: str) -> None:
        self.model_id = model_id

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        raise CacheMiss(f"no cached response for prompt {sha256_text(request.prompt)[:12]}")
