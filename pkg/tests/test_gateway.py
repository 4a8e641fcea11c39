from __future__ import annotations

import threading

import pytest

from ideatree.errors import (
    AuthError,
    BudgetExceeded,
    ProviderExhausted,
    TransientProviderError,
)
from ideatree.gateway import (
    ChatRequest,
    ChatResponse,
    FlakyProvider,
    Gateway,
    OpenAIChatProvider,
    SamplingParams,
    ScriptedProvider,
    ScriptMiss,
    ScriptRule,
    cache_key,
    request_fingerprint,
)


def _request(text="hello", sample_index=0, model="m"):
    return ChatRequest(
        model=model, system="sys", turns=(("user", text),), sample_index=sample_index
    )


def _gateway(provider, **kwargs):
    kwargs.setdefault("sleep", lambda _s: None)
    return Gateway(provider, **kwargs)


def test_sampling_params_defaults_and_validation():
    params = SamplingParams()
    assert params.temperature == 0.9
    assert params.top_p == 0.95
    with pytest.raises(ValueError):
        SamplingParams(temperature=-0.1)
    with pytest.raises(ValueError):
        SamplingParams(top_p=0.0)
    with pytest.raises(ValueError):
        SamplingParams(max_tokens=0)


def test_request_roles_must_alternate():
    with pytest.raises(ValueError):
        ChatRequest(model="m", system="s", turns=(("assistant", "hi"),))
    with pytest.raises(ValueError):
        ChatRequest(model="m", system="s", turns=())
    ChatRequest(model="m", system="s", turns=(("user", "a"), ("assistant", "b"), ("user", "c")))


def test_fingerprint_ignores_sample_index_cache_key_does_not():
    a, b = _request(sample_index=0), _request(sample_index=1)
    assert request_fingerprint(a) == request_fingerprint(b)
    assert cache_key(a) != cache_key(b)
    assert cache_key(a) != cache_key(_request(text="other"))


def test_cache_hit_skips_provider(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("hi there",))])
    gateway = _gateway(provider, cache_dir=tmp_path / "cache")
    first = gateway.complete(_request())
    second = gateway.complete(_request())
    assert provider.calls == 1
    assert first.text == second.text == "hi there"


def test_cache_survives_process_boundary(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("hi",))])
    _gateway(provider, cache_dir=tmp_path / "c").complete(_request())
    # a fresh gateway over the same directory sees the entry
    other = _gateway(ScriptedProvider([]), cache_dir=tmp_path / "c")
    assert other.complete(_request()).text == "hi"


def test_sample_index_forces_fresh_draws(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("r0", "r1"))])
    gateway = _gateway(provider, cache_dir=tmp_path / "c")
    assert gateway.complete(_request(sample_index=0)).text == "r0"
    assert gateway.complete(_request(sample_index=1)).text == "r1"
    assert provider.calls == 2


def test_scripted_exact_entries_and_miss():
    request = _request()
    provider = ScriptedProvider(
        entries={(request_fingerprint(request), 0): "exact"}, default=None
    )
    assert provider.complete(request).text == "exact"
    with pytest.raises(ScriptMiss):
        provider.complete(_request(text="unknown"))


def test_scripted_default_fallback():
    provider = ScriptedProvider([], default="fallback")
    assert provider.complete(_request()).text == "fallback"


def test_empty_response_is_not_an_error():
    provider = ScriptedProvider([ScriptRule("hello", ("",))])
    response = _gateway(provider).complete(_request())
    assert response.text == ""
    assert response.tokens_out == 0


def test_retry_then_success_and_exhaustion():
    sleeps: list[float] = []
    inner = ScriptedProvider([ScriptRule("hello", ("ok",))])
    gateway = Gateway(FlakyProvider(inner, failures=2), max_attempts=3, sleep=sleeps.append)
    assert gateway.complete(_request()).text == "ok"
    assert len(sleeps) == 2
    assert sleeps == sorted(sleeps)  # exponential backoff grows

    gateway = Gateway(FlakyProvider(inner, failures=5), max_attempts=3, sleep=lambda _s: None)
    with pytest.raises(ProviderExhausted):
        gateway.complete(_request(text="fresh"))


def test_auth_error_never_retried():
    class Denied:
        calls = 0

        def complete(self, request):
            self.calls += 1
            raise AuthError("nope")

    provider = Denied()
    with pytest.raises(AuthError):
        _gateway(provider, max_attempts=5).complete(_request())
    assert provider.calls == 1


def test_budget_ceiling(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("three word answer",))])
    gateway = _gateway(provider, cache_dir=tmp_path / "c", token_budget=2)
    gateway.complete(_request(sample_index=0))  # crosses the ceiling (3 tokens)
    with pytest.raises(BudgetExceeded):
        gateway.complete(_request(sample_index=1))
    # cache hits stay readable after the budget is spent
    assert gateway.complete(_request(sample_index=0)).text == "three word answer"


def test_sanitizer_strips_literals_before_provider_and_cache():
    provider = ScriptedProvider([ScriptRule("FORBIDDEN", ("saw it",))], default="clean")
    gateway = _gateway(provider, sanitize=("FORBIDDEN",))
    assert gateway.complete(_request(text="FORBIDDEN words")).text == "clean"


def test_batch_alignment_and_concurrency_cap():
    provider = ScriptedProvider(
        [ScriptRule("hello", tuple(f"r{i}" for i in range(10)))], latency=0.005
    )
    gateway = _gateway(provider)
    requests = [_request(sample_index=i) for i in range(10)]
    responses = gateway.complete_batch(requests, limit=3)
    assert [r.text for r in responses] == [f"r{i}" for i in range(10)]
    assert provider.peak_in_flight <= 3


def test_batch_degenerate_single():
    provider = ScriptedProvider([ScriptRule("hello", ("only",))])
    gateway = _gateway(provider)
    [response] = gateway.complete_batch([_request()], limit=100)
    assert response.text == "only"


def test_batch_isolates_failures():
    provider = ScriptedProvider([ScriptRule("hello", ("ok",))])
    gateway = _gateway(provider)
    requests = [_request(sample_index=i) for i in range(9)]
    requests.insert(4, _request(text="no rule matches this"))
    results = gateway.complete_batch(requests, limit=4)
    assert isinstance(results[4], ScriptMiss)
    assert [r.text for i, r in enumerate(results) if i != 4] == ["ok"] * 9


def test_batch_limit_validation():
    gateway = _gateway(ScriptedProvider([], default="x"))
    with pytest.raises(ValueError):
        gateway.complete_batch([_request()], limit=0)
    assert gateway.complete_batch([], limit=3) == []


def test_gateway_token_accounting(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("a b c", "d e"))])
    gateway = _gateway(provider, cache_dir=tmp_path / "c")
    gateway.complete(_request(sample_index=0))
    gateway.complete(_request(sample_index=1))
    gateway.complete(_request(sample_index=0))  # cached; charges nothing
    assert gateway.tokens_out_spent == 5


class _FakeHttpResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no body")
        return self._payload


class _FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.posted = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posted.append({"url": url, "json": json, "headers": headers})
        return self.responses.pop(0)


def test_openai_provider_parses_payload(monkeypatch):
    monkeypatch.setenv("PROVIDER_API_KEY", "sekrit")
    session = _FakeSession(
        [
            _FakeHttpResponse(
                200,
                {
                    "model": "m-1",
                    "choices": [{"message": {"content": "result text"}}],
                    "usage": {"prompt_tokens": 7, "completion_tokens": 3},
                },
            )
        ]
    )
    provider = OpenAIChatProvider("http://example.test/v1", session=session)
    response = provider.complete(_request())
    assert response == ChatResponse(
        text="result text",
        tokens_in=7,
        tokens_out=3,
        provider_meta=(("provider", "openai"), ("model", "m-1")),
    )
    sent = session.posted[0]
    assert sent["url"] == "http://example.test/v1/chat/completions"
    assert sent["headers"]["Authorization"] == "Bearer sekrit"
    assert sent["json"]["messages"][0] == {"role": "system", "content": "sys"}


@pytest.mark.parametrize(
    "status,error",
    [(401, AuthError), (403, AuthError), (429, TransientProviderError), (500, TransientProviderError)],
)
def test_openai_provider_error_mapping(status, error):
    provider = OpenAIChatProvider(
        "http://example.test", session=_FakeSession([_FakeHttpResponse(status, text="boom")])
    )
    with pytest.raises(error):
        provider.complete(_request())


def test_concurrent_cache_writes_are_safe(tmp_path):
    provider = ScriptedProvider([ScriptRule("hello", ("ok",))], latency=0.002)
    gateway = _gateway(provider, cache_dir=tmp_path / "c")
    errors = []

    def worker():
        try:
            gateway.complete(_request())
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
