"""Chat-completion backends: an HTTP client and a deterministic extractive mock."""

from __future__ import annotations

import math
import os
import re
import time
from dataclasses import dataclass
from typing import Callable, Protocol

import httpx

from .batching import estimate_tokens
from .retry import MAX_ATTEMPTS, call_with_retry
from .text import CITATION_RE, split_sentences, word_count

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-3.5-turbo"
MOCK_MODEL = "mock-extractive"


class BackendError(Exception):
    pass


class AuthError(BackendError):
    pass


class MissingCredential(AuthError):
    pass


class RateLimited(BackendError):
    def __init__(self, retry_after: float | None = None, body: str = "") -> None:
        super().__init__(f"rate limited (retry after {retry_after})")
        self.retry_after = retry_after
        self.body = body


class ContextOverflow(BackendError):
    pass


class TransportError(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class UnparseablePrompt(BackendError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 400

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0, 1], got {self.temperature}")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    input_tokens: int
    output_tokens: int
    backend_id: str
    latency: float = 0.0


class Backend(Protocol):
    backend_id: str
    model_id: str

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def _guard_context(prompt: str, token_limit: int) -> None:
    estimate = estimate_tokens(prompt)
    if estimate > token_limit:
        raise ContextOverflow(f"prompt is ~{estimate} tokens, limit is {token_limit}")


class HttpBackend:
    """OpenAI-style ``/chat/completions`` client.

    The API key is read from the environment variable named by
    ``api_key_env`` when the backend is constructed.
    """

    backend_id = "http"

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        model_id: str = DEFAULT_MODEL,
        *,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        token_limit: int = 4096,
        timeout: float = 120.0,
        max_attempts: int = MAX_ATTEMPTS,
        http: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        api_key = os.environ.get(api_key_env)
        if not api_key:
            raise MissingCredential(f"environment variable {api_key_env} is not set")
        self.endpoint = endpoint
        self.model_id = model_id
        self.token_limit = token_limit
        self.max_attempts = max_attempts
        self._headers = {"Authorization": f"Bearer {api_key}"}
        self._http = http or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def _post(self, payload: dict) -> httpx.Response:
        try:
            response = self._http.post(self.endpoint, json=payload, headers=self._headers)
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"HTTP {status}: {response.text[:200]}")
        if status == 429:
            retry_after = response.headers.get("retry-after")
            try:
                seconds = float(retry_after) if retry_after is not None else None
            except ValueError:
                seconds = None
            raise RateLimited(seconds, response.text)
        if status >= 500:
            raise TransportError(f"HTTP {status}: {response.text[:200]}")
        if status == 400 and "context_length" in response.text:
            raise ContextOverflow(response.text[:200])
        if status // 100 != 2:
            raise BackendError(f"HTTP {status}: {response.text[:200]}")
        return response

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        _guard_context(request.prompt, self.token_limit)
        payload = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.monotonic()
        response = call_with_retry(
            lambda: self._post(payload),
            lambda exc: isinstance(exc, (RateLimited, TransportError)),
            max_attempts=self.max_attempts,
            sleep=self._sleep,
        )
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response body: {response.text[:200]}") from exc
        if not isinstance(text, str) or not text.strip():
            raise MalformedResponse("completion text is empty")
        usage = body.get("usage") or {}
        return CompletionResponse(
            text=text.strip(),
            input_tokens=int(usage.get("prompt_tokens", estimate_tokens(request.prompt))),
            output_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
            backend_id=self.backend_id,
            latency=time.monotonic() - started,
        )


# -- mock ------------------------------------------------------------------

_MAP_BUDGET = re.compile(r"Write an? (\d+) word thesis")
_REDUCE_RANGE = re.compile(r"Write an? (\d+)-(\d+)-word thesis")
_TRIALS_FENCE = re.compile(r"Trials: ```\n(.*?)\n```", re.DOTALL)
_SUMMARY_FENCE = re.compile(r"Summary: ```\n(.*?)\n```", re.DOTALL)
_TRIAL_ITEM = re.compile(r"^(\d+)\. [^\n]*\n(.*)$", re.DOTALL)
_TRAILING_PUNCT = re.compile(r"[\s.!?;:,]+$")


def _cite(sentence: str, index: int) -> str:
    """Attach ``[index]`` just before the sentence's closing punctuation."""
    body = _TRAILING_PUNCT.sub("", sentence)
    return f"{body} [{index}]."


def _clip(sentence: str, n_words: int) -> str:
    tokens = CITATION_RE.sub(" ", sentence).split()
    return " ".join(tokens[:n_words])


def _mock_map(block: str, budget: int) -> str:
    items: list[tuple[int, str]] = []
    for chunk in block.split("\n\n"):
        match = _TRIAL_ITEM.match(chunk.strip())
        if not match:
            raise UnparseablePrompt(f"cannot parse trial entry: {chunk[:60]!r}")
        sentences = split_sentences(match.group(2))
        items.append((int(match.group(1)), sentences[0] if sentences else ""))
    if not items:
        raise UnparseablePrompt("trial block is empty")

    out: list[str] = []
    used = 0
    for index, sentence in items:
        cited = _cite(sentence, index)
        n = word_count(cited)
        if used + n > budget:
            break
        out.append(cited)
        used += n

    must_cite = math.ceil(len(items) / 2)
    if len(out) >= must_cite:
        return " ".join(out)

    # Too few whole sentences fit: clip each one so at least half the trials get cited.
    # the citation marker itself counts as a word
    share = max(1, budget // must_cite - 1)
    out, used = [], 0
    for index, sentence in items:
        cited = _cite(_clip(sentence, share), index)
        n = word_count(cited)
        if used + n > budget:
            break
        out.append(cited)
        used += n
    return " ".join(out)


def _mock_reduce(block: str, min_words: int, max_words: int) -> str:
    paragraphs = [split_sentences(p) for p in block.split("\n\n") if p.strip()]
    if not paragraphs:
        raise UnparseablePrompt("summary block is empty")
    target = (min_words + max_words) // 2
    out: list[str] = []
    used = 0
    depth = max(len(p) for p in paragraphs)
    # Round-robin over paragraphs so every batch summary contributes.
    for level in range(depth):
        for sentences in paragraphs:
            if level >= len(sentences):
                continue
            n = word_count(sentences[level])
            if n == 0 or used + n > max_words:
                continue
            out.append(sentences[level])
            used += n
            if used >= target:
                return " ".join(out)
    return " ".join(out)


def mock_complete(prompt: str) -> str:
    """Deterministic extractive stand-in for a chat model.

    Map prompts: the first sentence of each trial, cited with its local
    index, cut at the last whole sentence within the word budget; at least
    half of the trials are always cited, clipping sentences if needed.
    Reduce prompts: sentences of the intermediate summaries taken
    round-robin until the middle of the requested range, never past its
    upper end. Citations are only ever copied, never invented.
    """
    reduce_match = _REDUCE_RANGE.search(prompt)
    if reduce_match:
        fence = _SUMMARY_FENCE.search(prompt)
        if not fence:
            raise UnparseablePrompt("reduce prompt has no Summary block")
        return _mock_reduce(fence.group(1), int(reduce_match.group(1)), int(reduce_match.group(2)))
    map_match = _MAP_BUDGET.search(prompt)
    if map_match:
        fence = _TRIALS_FENCE.search(prompt)
        if not fence:
            raise UnparseablePrompt("map prompt has no Trials block")
        return _mock_map(fence.group(1), int(map_match.group(1)))
    raise UnparseablePrompt("prompt carries no word-budget instruction")


class MockBackend:
    backend_id = "mock"

    def __init__(self, model_id: str = MOCK_MODEL, token_limit: int = 4096) -> None:
        self.model_id = model_id
        self.token_limit = token_limit
        self.calls = 0

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        _guard_context(request.prompt, self.token_limit)
        self.calls += 1
        text = mock_complete(request.prompt)
        return CompletionResponse(
            text=text,
            input_tokens=estimate_tokens(request.prompt),
            output_tokens=estimate_tokens(text),
            backend_id=self.backend_id,
        )
