"""Chat-completion backends.

``LiveBackend`` talks to any server exposing the usual
``POST /v1/chat/completions`` route. ``ScriptedBackend`` replays canned
responses so the deliberation protocol can be exercised offline.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import defaultdict
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .errors import AuthFailure, BackendFailure, MalformedResponse, ScriptExhausted

log = logging.getLogger(__name__)

API_KEY_ENV = "REPHRASE_API_KEY"
API_BASE_ENV = "REPHRASE_API_BASE"
DEFAULT_API_BASE = "https://api.openai.com"
DEFAULT_TEMPERATURE = 0.2


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid message role {self.role!r}")
        if self.role != "assistant" and not self.content.strip():
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = 1024
    # "<role>" or "<role>/<pair id>"; used for logging and scripted lookup
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("the first message must have role 'system'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be > 0")

    @property
    def role_tag(self) -> str:
        return self.tag.split("/", 1)[0]


@dataclass(frozen=True)
class CompletionResponse:
    content: str
    input_tokens: int = 0
    output_tokens: int = 0
    latency_ms: int = 0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_ms: int = 1000
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def backoff_ms(self, failed_attempt: int) -> float:
        """Sleep before the retry that follows ``failed_attempt`` (1-based)."""
        return self.base_backoff_ms * self.backoff_factor ** (failed_attempt - 1)


class ChatBackend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


class _Transient(Exception):
    """Internal marker for retryable failures."""


class LiveBackend:
    """HTTP chat-completions client with exponential-backoff retries.

    Timeouts, transport errors, HTTP 429 and 5xx are retried; 401/403 raise
    AuthFailure immediately; other 4xx and unparseable bodies are not retried.
    """

    def __init__(
        self,
        model: str,
        *,
        base_url: str | None = None,
        api_key: str | None = None,
        retry: RetryPolicy | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not model:
            raise ValueError("a model name is required")
        self.model = model
        self.base_url = (base_url or os.environ.get(API_BASE_ENV) or DEFAULT_API_BASE).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.retry = retry or RetryPolicy()
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)

    @property
    def endpoint(self) -> str:
        return f"{self.base_url}/v1/chat/completions"

    def close(self) -> None:
        self._client.close()

    def _payload(self, request: CompletionRequest) -> dict:
        return {
            "model": self.model,
            "messages": [m.to_dict() for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def _attempt(self, request: CompletionRequest) -> CompletionResponse:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        started = time.monotonic()
        try:
            resp = self._client.post(self.endpoint, json=self._payload(request), headers=headers)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise _Transient(f"{type(exc).__name__}: {exc}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)

        if resp.status_code in (401, 403):
            raise AuthFailure(f"HTTP {resp.status_code} from {self.endpoint}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendFailure(1, f"HTTP {resp.status_code}: {resp.text[:200]}")

        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response body: {exc!r}") from None
        if not isinstance(content, str):
            raise MalformedResponse("message content is not a string")
        usage = body.get("usage") or {}
        return CompletionResponse(
            content=content,
            input_tokens=int(usage.get("prompt_tokens", 0) or 0),
            output_tokens=int(usage.get("completion_tokens", 0) or 0),
            latency_ms=latency_ms,
        )

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        last_cause: object = None
        for attempt in range(1, self.retry.max_attempts + 1):
            try:
                return self._attempt(request)
            except _Transient as exc:
                last_cause = exc
                log.warning("%s: attempt %d/%d failed: %s", request.tag, attempt, self.retry.max_attempts, exc)
                if attempt < self.retry.max_attempts:
                    self._sleep(self.retry.backoff_ms(attempt) / 1000.0)
            except BackendFailure as exc:
                raise BackendFailure(attempt, exc.last_cause) from None
        raise BackendFailure(self.retry.max_attempts, last_cause)


@dataclass
class ScriptedBackend:
    """Replays responses keyed by ``(tag, n)``: the n-th call (1-based) made under a tag.

    A key's tag may be a bare role (``"broker"``), which serves every pair, or
    ``"broker/p1"`` for one pair. Ordinals are counted per full request tag and
    each full key is served at most once. Once any key names a pair-qualified
    tag, that tag no longer falls back to the bare-role entries.
    """

    script: Mapping[tuple[str, int], str]
    _counts: dict[str, int] = field(default_factory=lambda: defaultdict(int), init=False, repr=False)
    _served: set[tuple[str, int]] = field(default_factory=set, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.script:
            raise ValueError("script must not be empty")
        self.script = dict(self.script)
        self._pinned = {tag for tag, _ in self.script if "/" in tag}

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        tag = request.tag
        with self._lock:
            self._counts[tag] += 1
            key = (tag, self._counts[tag])
            if key in self._served:
                raise ScriptExhausted(key)
            if key in self.script:
                text = self.script[key]
            elif tag not in self._pinned and (request.role_tag, key[1]) in self.script:
                text = self.script[(request.role_tag, key[1])]
            else:
                raise ScriptExhausted(key)
            self._served.add(key)
        return CompletionResponse(content=text)


def scripted_backend(script: Mapping[tuple[str, int], str]) -> ScriptedBackend:
    return ScriptedBackend(script)


def load_script(path: str | Path) -> dict[tuple[str, int], str]:
    """Read a script file: a JSON object mapping tag -> list of responses in call order."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: script must be a JSON object of tag -> list of strings")
    script: dict[tuple[str, int], str] = {}
    for tag, responses in data.items():
        if isinstance(responses, str):
            responses = [responses]
        if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
            raise ValueError(f"{path}: entry {tag!r} must be a string or list of strings")
        for n, text in enumerate(responses, start=1):
            script[(tag, n)] = text
        if not responses:
            # empty list pins a pair-qualified tag with no responses
            script.setdefault((tag, 0), "")
    return script
