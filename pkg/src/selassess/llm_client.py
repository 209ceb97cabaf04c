"""Chat-completion client: OpenAI-compatible HTTP backend, deterministic
mock backend, retry with exponential backoff, and token-usage capture.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Protocol

import requests

from .errors import (
    AuthError,
    InvalidRequest,
    MalformedResponse,
    RateLimited,
    ScriptExhausted,
    TransportError,
)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 1024
API_KEY_ENV = "SELASSESS_API_KEY"
BASE_URL_ENV = "SELASSESS_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class UsageSource(str, Enum):
    PROVIDER_REPORTED = "provider_reported"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise InvalidRequest(f"{self.role.value} message content must be non-empty")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    request_tag: str = ""

    def __post_init__(self):
        if not self.messages:
            raise InvalidRequest("messages must be non-empty")
        if self.messages[-1].role is not Role.USER:
            raise InvalidRequest("last message must have role user")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidRequest("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise InvalidRequest("max_output_tokens must be positive")


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int
    output_tokens: int
    source: UsageSource

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise InvalidRequest("token counts must be non-negative")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    usage: TokenUsage
    model_id: str
    latency_ms: float = 0.0


def estimate_tokens(text: str) -> int:
    """Fallback token estimate: ceil(utf-8 byte length / 4)."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def _estimated_usage(req: CompletionRequest, output_text: str) -> TokenUsage:
    return TokenUsage(
        input_tokens=sum(estimate_tokens(m.content) for m in req.messages),
        output_tokens=estimate_tokens(output_text),
        source=UsageSource.ESTIMATED,
    )


class Backend(Protocol):
    #: deterministic backends yield byte-identical runs; used to decide
    #: whether run artifacts carry wall-clock timestamps
    deterministic: bool

    def send(self, req: CompletionRequest) -> CompletionResponse: ...


class OpenAICompatBackend:
    """Real backend speaking the /chat/completions wire protocol."""

    deterministic = False

    def __init__(self, base_url: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV)
                         or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        if not self.api_key:
            raise AuthError(f"no API key: set {API_KEY_ENV}")

    def send(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "model": req.model_id,
            "messages": [{"role": m.role.value, "content": m.content}
                         for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        started = time.monotonic()
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        latency_ms = (time.monotonic() - started) * 1000.0
        if resp.status_code in (401, 403):
            raise AuthError(f"HTTP {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimited("HTTP 429")
        if resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise MalformedResponse(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc
        usage_obj = payload.get("usage")
        if (isinstance(usage_obj, dict) and "prompt_tokens" in usage_obj
                and "completion_tokens" in usage_obj):
            usage = TokenUsage(int(usage_obj["prompt_tokens"]),
                               int(usage_obj["completion_tokens"]),
                               UsageSource.PROVIDER_REPORTED)
        else:
            usage = _estimated_usage(req, text)
        return CompletionResponse(text=text, usage=usage,
                                  model_id=req.model_id, latency_ms=latency_ms)


@dataclass
class ScriptRule:
    """One mock-script entry.

    match is "sequence" (consumed in order) or "contains:<substr>" (fires
    for any request whose last user message contains the substring).
    Exactly one of response/error is set.
    """
    match: str
    response: Optional[str] = None
    error: Optional[str] = None


_SCRIPT_ERRORS: dict[str, type[Exception]] = {
    "rate_limited": RateLimited,
    "transport": TransportError,
    "auth": AuthError,
    "malformed": MalformedResponse,
}


class MockBackend:
    """Deterministic scripted backend; records every request it sees."""

    deterministic = True

    def __init__(self, rules: list[ScriptRule]):
        if not rules:
            raise InvalidRequest("mock script must have at least one rule")
        self._contains = [r for r in rules if r.match.startswith("contains:")]
        self._sequence = [r for r in rules if r.match == "sequence"]
        for r in rules:
            if not (r.match == "sequence" or r.match.startswith("contains:")):
                raise InvalidRequest(f"unknown script match kind: {r.match!r}")
            if (r.response is None) == (r.error is None):
                raise InvalidRequest("script rule needs exactly one of response/error")
        self._cursor = 0
        self._lock = threading.Lock()
        self.requests: list[CompletionRequest] = []

    @classmethod
    def from_responses(cls, responses: list[str]) -> "MockBackend":
        return cls([ScriptRule(match="sequence", response=r) for r in responses])

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [ScriptRule(match=e["match"], response=e.get("response"),
                            error=e.get("error")) for e in entries]
        return cls(rules)

    def send(self, req: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.requests.append(req)
            rule = self._pick(req)
        if rule.error is not None:
            exc_type = _SCRIPT_ERRORS.get(rule.error, TransportError)
            raise exc_type(f"scripted error: {rule.error}")
        text = rule.response or ""
        return CompletionResponse(text=text, usage=_estimated_usage(req, text),
                                  model_id=req.model_id, latency_ms=0.0)

    def _pick(self, req: CompletionRequest) -> ScriptRule:
        last_user = next((m.content for m in reversed(req.messages)
                          if m.role is Role.USER), "")
        for rule in self._contains:
            if rule.match[len("contains:"):] in last_user:
                return rule
        if self._cursor >= len(self._sequence):
            raise ScriptExhausted(
                f"mock script exhausted after {self._cursor} sequenced responses")
        rule = self._sequence[self._cursor]
        self._cursor += 1
        return rule


@dataclass
class RetryPolicy:
    base_delay: float = 1.0
    factor: float = 2.0
    max_attempts: int = 5
    sleep: Callable[[float], None] = field(default=time.sleep)


def complete(req: CompletionRequest, backend: Backend,
             retry: Optional[RetryPolicy] = None) -> CompletionResponse:
    """Send a request, retrying transient failures with exponential backoff.

    RateLimited and TransportError are retried up to max_attempts; AuthError
    and MalformedResponse surface immediately.
    """
    policy = retry or RetryPolicy()
    last_exc: Optional[Exception] = None
    for attempt in range(policy.max_attempts):
        try:
            return backend.send(req)
        except (RateLimited, TransportError) as exc:
            last_exc = exc
            if attempt < policy.max_attempts - 1:
                policy.sleep(policy.base_delay * policy.factor ** attempt)
    assert last_exc is not None
    raise last_exc
