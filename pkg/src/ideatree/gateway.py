"""Chat-completion gateway: providers, response cache, retries, bounded batches.

Every model call in the harness goes through :class:`Gateway` so that caching,
retry policy, token budgeting and prompt sanitizing are applied uniformly, no
matter whether the provider is a live HTTP endpoint or the deterministic
scripted double used by the test suite.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .errors import (
    AuthError,
    BudgetExceeded,
    ProviderExhausted,
    TransientProviderError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    """Decoding parameters; defaults are the harness-wide experiment settings."""

    temperature: float = 0.9
    top_p: float = 0.95
    max_tokens: int = 4096

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatRequest:
    """One chat completion; `sample_index` distinguishes repeated draws."""

    model: str
    system: str
    turns: tuple[tuple[str, str], ...]
    params: SamplingParams = SamplingParams()
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError("turns must be nonempty")
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        for i, (role, _text) in enumerate(self.turns):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(
                    f"turn {i} has role {role!r}; turns must alternate user/assistant"
                    " starting with user"
                )

    def rendered(self) -> str:
        """Full prompt text, used by scripted matching and token estimates."""
        parts = [self.system]
        parts.extend(text for _role, text in self.turns)
        return "\n".join(p for p in parts if p)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tokens_in: int = 0
    tokens_out: int = 0
    provider_meta: tuple[tuple[str, str], ...] = ()

    def meta(self) -> dict[str, str]:
        return dict(self.provider_meta)


def _canonical_body(request: ChatRequest) -> dict:
    return {
        "model": request.model,
        "system": request.system,
        "turns": [list(t) for t in request.turns],
        "params": {
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_tokens,
        },
    }


def request_fingerprint(request: ChatRequest) -> str:
    """Content hash of everything except sample_index (scripted-provider key)."""
    blob = json.dumps(_canonical_body(request), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def cache_key(request: ChatRequest) -> str:
    """Content hash including sample_index, so repeated draws cache separately."""
    body = _canonical_body(request)
    body["sample_index"] = request.sample_index
    blob = json.dumps(body, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Provider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def _estimate_tokens(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class ScriptRule:
    """Canned answer chosen when `contains` appears in the rendered prompt."""

    contains: str
    responses: tuple[str, ...]

    def pick(self, sample_index: int) -> str:
        return self.responses[sample_index % len(self.responses)]


class ScriptMiss(LookupError):
    """No script entry, rule, or default matched; a test-authoring bug."""


class ScriptedProvider:
    """Deterministic stand-in for an LLM.

    Resolution order: exact (fingerprint, sample_index) entries, then the
    first matching substring rule, then the default text. Tracks call counts
    and peak concurrency so tests can assert gateway behavior.
    """

    def __init__(
        self,
        rules: Sequence[ScriptRule] = (),
        *,
        entries: dict[tuple[str, int], str] | None = None,
        default: str | None = None,
        latency: float = 0.0,
    ) -> None:
        self.rules = tuple(rules)
        self.entries = dict(entries or {})
        self.default = default
        self.latency = latency
        self.calls = 0
        self.peak_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    @classmethod
    def from_json(cls, source: str | Path | dict) -> "ScriptedProvider":
        """Build from a mock-script file: {"rules": [...], "default": "..."}."""
        if isinstance(source, (str, Path)):
            obj = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            obj = source
        rules = []
        for raw in obj.get("rules", []):
            responses = raw.get("responses")
            if responses is None:
                responses = [raw["text"]]
            rules.append(ScriptRule(contains=raw["contains"], responses=tuple(responses)))
        return cls(rules, default=obj.get("default"))

    def _resolve(self, request: ChatRequest) -> str:
        exact = self.entries.get((request_fingerprint(request), request.sample_index))
        if exact is not None:
            return exact
        prompt = request.rendered()
        for rule in self.rules:
            if rule.contains in prompt:
                return rule.pick(request.sample_index)
        if self.default is not None:
            return self.default
        raise ScriptMiss(
            f"no scripted response for sample {request.sample_index} of prompt: "
            f"{prompt[:200]!r}"
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            self._in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
        try:
            if self.latency:
                time.sleep(self.latency)
            text = self._resolve(request)
            return ChatResponse(
                text=text,
                tokens_in=_estimate_tokens(request.rendered()),
                tokens_out=_estimate_tokens(text),
                provider_meta=(("provider", "scripted"),),
            )
        finally:
            with self._lock:
                self._in_flight -= 1


class FlakyProvider:
    """Test helper: fails with transient errors N times, then delegates."""

    def __init__(self, inner: Provider, failures: int) -> None:
        self.inner = inner
        self.failures_left = failures
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            if self.failures_left > 0:
                self.failures_left -= 1
                raise TransientProviderError("synthetic transient failure")
        return self.inner.complete(request)


class OpenAIChatProvider:
    """OpenAI-style /chat/completions endpoint over HTTP.

    The auth token is read from the environment (`api_key_env`) at call time
    so the key never lands in config snapshots.
    """

    def __init__(
        self,
        base_url: str,
        *,
        api_key_env: str = "PROVIDER_API_KEY",
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.extend({"role": role, "content": text} for role, text in request.turns)
        payload = {
            "model": request.model,
            "messages": messages,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_tokens,
        }
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientProviderError(f"network failure: {exc}") from exc

        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code != 200:
            raise TransientProviderError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            obj = resp.json()
            text = obj["choices"][0]["message"]["content"] or ""
            usage = obj.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransientProviderError(f"unparsable provider response: {exc}") from exc
        return ChatResponse(
            text=text,
            tokens_in=int(usage.get("prompt_tokens", _estimate_tokens(request.rendered()))),
            tokens_out=int(usage.get("completion_tokens", _estimate_tokens(text))),
            provider_meta=(("provider", "openai"), ("model", str(obj.get("model", "")))),
        )


class ResponseCache:
    """Content-addressed response store: one JSON file per cache key."""

    def __init__(self, directory: str | Path | None) -> None:
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, ChatResponse] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> ChatResponse | None:
        with self._lock:
            hit = self._memory.get(key)
        if hit is not None:
            return hit
        if self.directory is None:
            return None
        path = self.directory / f"{key}.json"
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        response = ChatResponse(
            text=obj["text"],
            tokens_in=obj["tokens_in"],
            tokens_out=obj["tokens_out"],
            provider_meta=tuple((k, v) for k, v in sorted(obj["provider_meta"].items())),
        )
        with self._lock:
            self._memory[key] = response
        return response

    def put(self, key: str, response: ChatResponse) -> None:
        with self._lock:
            self._memory[key] = response
            if self.directory is None:
                return
            blob = json.dumps(
                {
                    "text": response.text,
                    "tokens_in": response.tokens_in,
                    "tokens_out": response.tokens_out,
                    "provider_meta": dict(response.provider_meta),
                },
                sort_keys=True,
                ensure_ascii=False,
            )
            tmp = self.directory / f"{key}.tmp"
            tmp.write_text(blob, encoding="utf-8")
            tmp.replace(self.directory / f"{key}.json")


class Gateway:
    """Uniform completion interface with caching, retries, and budgeting."""

    def __init__(
        self,
        provider: Provider,
        *,
        cache_dir: str | Path | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.25,
        backoff_cap: float = 8.0,
        token_budget: int | None = None,
        sanitize: Sequence[str] = (),
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.provider = provider
        self.cache = ResponseCache(cache_dir)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.token_budget = token_budget
        self.sanitize = tuple(sanitize)
        self._sleep = sleep
        self._spent_out = 0
        self._spent_lock = threading.Lock()

    @property
    def tokens_out_spent(self) -> int:
        """Generated tokens across all non-cached calls so far."""
        with self._spent_lock:
            return self._spent_out

    def _sanitized(self, request: ChatRequest) -> ChatRequest:
        if not self.sanitize:
            return request

        def clean(text: str) -> str:
            for literal in self.sanitize:
                text = text.replace(literal, "")
            return text

        return ChatRequest(
            model=request.model,
            system=clean(request.system),
            turns=tuple((role, clean(text)) for role, text in request.turns),
            params=request.params,
            sample_index=request.sample_index,
        )

    def _charge(self, tokens_out: int) -> None:
        with self._spent_lock:
            self._spent_out += tokens_out

    def _check_budget(self) -> None:
        if self.token_budget is None:
            return
        with self._spent_lock:
            spent = self._spent_out
        if spent >= self.token_budget:
            raise BudgetExceeded(
                f"token budget {self.token_budget} crossed (spent {spent})"
            )

    def complete(self, request: ChatRequest) -> ChatResponse:
        """Complete one request; cache hits return byte-identical responses."""
        request = self._sanitized(request)
        key = cache_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            return cached

        self._check_budget()
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                response = self.provider.complete(request)
            except AuthError:
                raise
            except TransientProviderError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    delay = min(self.backoff_base * (2**attempt), self.backoff_cap)
                    logger.debug("transient provider failure, retrying in %.2fs", delay)
                    self._sleep(delay)
                continue
            self._charge(response.tokens_out)
            self.cache.put(key, response)
            return response
        raise ProviderExhausted(
            f"gave up after {self.max_attempts} attempt(s): {last}"
        ) from last

    def complete_batch(
        self, requests_: Sequence[ChatRequest], limit: int
    ) -> list[ChatResponse | Exception]:
        """Complete many requests with at most `limit` in flight.

        Results align positionally with the inputs; a failed item carries its
        exception instead of aborting the batch.
        """
        if limit < 1:
            raise ValueError("limit must be >= 1")
        if not requests_:
            return []

        def one(req: ChatRequest) -> ChatResponse | Exception:
            try:
                return self.complete(req)
            except Exception as exc:  # noqa: BLE001 - isolated per spec
                return exc

        with ThreadPoolExecutor(max_workers=limit) as pool:
            return list(pool.map(one, requests_))


def response_or_raise(item: ChatResponse | Exception) -> ChatResponse:
    """Unwrap a batch item, re-raising the stored exception if it failed."""
    if isinstance(item, Exception):
        raise item
    return item
