import json

import httpx
import pytest

from golden_inputs import golden_corpus, map_prompt, reduce_prompt
from trialsumm.citations import unique_indices
from trialsumm.llm_backend import (
    AuthError,
    BackendError,
    CompletionRequest,
    ContextOverflow,
    HttpBackend,
    MalformedResponse,
    MissingCredential,
    MockBackend,
    UnparseablePrompt,
    mock_complete,
)
from trialsumm.prompting import MapPromptInput, render_map_prompt
from trialsumm.text import word_count

OK_BODY = {"choices": [{"message": {"content": "Fitbit devices track steps [1]."}}], "usage": {"prompt_tokens": 9, "completion_tokens": 7}}


def test_mock_deterministic():
    prompt = map_prompt(15)
    assert mock_complete(prompt) == mock_complete(prompt)


def test_mock_three_trials_budget_39():
    trials = golden_corpus(3).trials
    out = mock_complete(render_map_prompt(MapPromptInput("Fitbit", "oncology", trials, 39)))
    assert out == (
        "Study 1 tracks daily steps with a Fitbit [1]. "
        "Study 2 tracks daily steps with a Fitbit [2]. "
        "Study 3 tracks daily steps with a Fitbit [3]."
    )
    assert word_count(out) <= 39


@pytest.mark.parametrize("n", [1, 2, 7, 15])
def test_mock_map_never_invents_and_respects_budget(n):
    out = mock_complete(map_prompt(n))
    assert unique_indices(out) <= set(range(1, n + 1))
    budget = 200 if n == 15 else 13 * n
    assert word_count(out) <= budget


def test_mock_hard_truncation_keeps_half_cited():
    # one whole first sentence (8 words) fits in 13, but two of three trials must be cited
    trials = golden_corpus(3).trials
    out = mock_complete(render_map_prompt(MapPromptInput("Fitbit", "oncology", trials, 13)))
    assert out == "Study 1 tracks daily steps [1]. Study 2 tracks daily steps [2]."
    assert word_count(out) <= 13


def test_mock_reduce_only_copies_citations():
    out = mock_complete(reduce_prompt())
    prompt_cites = unique_indices(reduce_prompt().split("References:")[0])
    assert unique_indices(out) <= prompt_cites
    assert word_count(out) <= 250


def test_mock_unparseable():
    with pytest.raises(UnparseablePrompt):
        mock_complete("Say hello.")


def test_mock_backend_counts_and_guards():
    backend = MockBackend(token_limit=10)
    with pytest.raises(ContextOverflow):
        backend.complete(CompletionRequest("m", "x" * 100))
    assert backend.calls == 0
    resp = MockBackend().complete(CompletionRequest("m", map_prompt(2)))
    assert resp.backend_id == "mock" and resp.text


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("m", "")
    with pytest.raises(ValueError):
        CompletionRequest("m", "p", temperature=1.5)


def _backend(handler, monkeypatch, **kw):
    monkeypatch.setenv("TEST_KEY", "secret")
    return HttpBackend(
        "https://llm.test/v1/chat/completions",
        "model-x",
        api_key_env="TEST_KEY",
        http=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=lambda s: None,
        **kw,
    )


def test_http_payload_and_parse(monkeypatch):
    seen = []

    def handler(request):
        seen.append((json.loads(request.content), request.headers["authorization"]))
        return httpx.Response(200, json=OK_BODY)

    resp = _backend(handler, monkeypatch).complete(CompletionRequest("model-x", "hello", max_output_tokens=50))
    body, auth = seen[0]
    assert body["temperature"] == 0.0
    assert body["model"] == "model-x"
    assert body["messages"] == [{"role": "user", "content": "hello"}]
    assert body["max_tokens"] == 50
    assert auth == "Bearer secret"
    assert resp.text == "Fitbit devices track steps [1]."
    assert (resp.input_tokens, resp.output_tokens) == (9, 7)


def test_http_missing_credential(monkeypatch):
    monkeypatch.delenv("NOPE_KEY", raising=False)
    with pytest.raises(MissingCredential):
        HttpBackend(api_key_env="NOPE_KEY")


def test_http_auth_error_not_retried(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    with pytest.raises(AuthError):
        _backend(handler, monkeypatch).complete(CompletionRequest("m", "hi"))
    assert len(calls) == 1


def test_http_context_overflow_before_network(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(200, json=OK_BODY)

    with pytest.raises(ContextOverflow):
        _backend(handler, monkeypatch, token_limit=5).complete(CompletionRequest("m", "x" * 100))
    assert calls == []


def test_http_server_context_error(monkeypatch):
    handler = lambda r: httpx.Response(400, text='{"error": {"code": "context_length_exceeded"}}')
    with pytest.raises(ContextOverflow):
        _backend(handler, monkeypatch).complete(CompletionRequest("m", "hi"))
    with pytest.raises(BackendError):
        _backend(lambda r: httpx.Response(418), monkeypatch).complete(CompletionRequest("m", "hi"))


def test_http_rate_limit_retry_after(monkeypatch):
    sleeps, responses = [], [httpx.Response(429, headers={"retry-after": "3"}), httpx.Response(200, json=OK_BODY)]
    monkeypatch.setenv("TEST_KEY", "secret")
    backend = HttpBackend(
        "https://llm.test/v1/chat/completions",
        api_key_env="TEST_KEY",
        http=httpx.Client(transport=httpx.MockTransport(lambda r: responses.pop(0))),
        sleep=sleeps.append,
    )
    assert backend.complete(CompletionRequest("m", "hi")).text.startswith("Fitbit")
    assert sleeps == [3.0]


def test_http_server_errors_exhaust(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)

    with pytest.raises(BackendError):
        _backend(handler, monkeypatch, max_attempts=3).complete(CompletionRequest("m", "hi"))
    assert len(calls) == 3


@pytest.mark.parametrize("body", [{"choices": []}, {"nope": 1}, {"choices": [{"message": {"content": "  "}}]}])
def test_http_malformed(monkeypatch, body):
    with pytest.raises(MalformedResponse):
        _backend(lambda r: httpx.Response(200, json=body), monkeypatch).complete(CompletionRequest("m", "hi"))
