"""Chat-completion backends: a remote HTTP client and a deterministic
scripted backend for tests, plus capture-to-script recording.

Remote configuration comes from the environment:

    DOCQA_LLM_ENDPOINT    chat-completions URL
    DOCQA_LLM_MODEL       model identifier
    DOCQA_LLM_API_KEY     bearer token
    DOCQA_LLM_TIMEOUT_MS  request timeout in milliseconds (default 60000)
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

ROLES = ("system", "user", "assistant")
TRANSIENT_STATUS = frozenset({429, 500, 502, 503, 504})


class BackendError(Exception):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BackendTimeout(BackendError):
    pass


class ScriptError(Exception):
    """Scripted backend could not serve a request."""


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[dict[str, str], ...]
    temperature: float = 0.001
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("at least one message required")
        for msg in self.messages:
            if msg.get("role") not in ROLES:
                raise ValueError(f"invalid role {msg.get('role')!r}")
        if self.messages[-1]["role"] == "assistant":
            raise ValueError("last message must not be from the assistant")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def last_user_content(self) -> str:
        for msg in reversed(self.messages):
            if msg["role"] == "user":
                return msg["content"]
        return self.messages[-1]["content"]


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: dict[str, int] = field(default_factory=dict)


class ChatBackend(Protocol):
    def chat(self, request: ChatRequest) -> ChatResponse: ...


@dataclass(frozen=True)
class ScriptEntry:
    """Response selected either by substring of the last user message or by
    1-based call ordinal; each entry fires at most once."""

    response: str
    contains: str | None = None
    index: int | None = None

    def __post_init__(self) -> None:
        if (self.contains is None) == (self.index is None):
            raise ValueError("exactly one of 'contains' or 'index' must be set")

    def to_dict(self) -> dict:
        matcher = {"contains": self.contains} if self.contains is not None else {"index": self.index}
        return {**matcher, "response": self.response}

    @classmethod
    def from_dict(cls, obj: dict) -> "ScriptEntry":
        return cls(
            response=obj["response"],
            contains=obj.get("contains"),
            index=obj.get("index"),
        )


class ScriptedBackend:
    """Pure function of (script, call sequence); cursor updates are locked so
    the backend tolerates concurrent callers."""

    deterministic = True

    def __init__(self, script: list[ScriptEntry]):
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self._consumed = [False] * len(script)
        self._calls = 0
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    @property
    def calls(self) -> int:
        return self._calls

    def chat(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self._calls += 1
            ordinal = self._calls
            self.requests.append(request)
            last_user = request.last_user_content()
            if all(self._consumed):
                raise ScriptError(f"script exhausted after {len(self._script)} responses")
            for i, entry in enumerate(self._script):
                if self._consumed[i]:
                    continue
                if entry.contains is not None and entry.contains in last_user:
                    self._consumed[i] = True
                    return ChatResponse(text=entry.response, usage={})
                if entry.index is not None and entry.index == ordinal:
                    self._consumed[i] = True
                    return ChatResponse(text=entry.response, usage={})
            raise ScriptError(f"no script entry matched request: {last_user[:80]!r}")


def load_script(path: str | Path) -> list[ScriptEntry]:
    entries = []
    with Path(path).open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                entries.append(ScriptEntry.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ScriptError(f"{path}: line {lineno}: {exc}") from exc
    return entries


def save_script(entries: list[ScriptEntry], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


class CaptureBackend:
    """Wraps a live backend and records every response as an index-matched
    script entry, so one live run becomes a deterministic replay."""

    deterministic = False

    def __init__(self, inner: ChatBackend, script_path: str | Path):
        self._inner = inner
        self._path = Path(script_path)
        self._lock = threading.Lock()
        self._ordinal = 0

    def chat(self, request: ChatRequest) -> ChatResponse:
        response = self._inner.chat(request)
        with self._lock:
            self._ordinal += 1
            entry = ScriptEntry(response=response.text, index=self._ordinal)
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
        return response


@dataclass
class HttpConfig:
    endpoint: str
    model: str
    api_key: str = ""
    timeout_ms: int = 60_000
    max_retries: int = 3
    backoff_base_s: float = 0.5

    @classmethod
    def from_env(cls) -> "HttpConfig":
        endpoint = os.environ.get("DOCQA_LLM_ENDPOINT", "")
        if not endpoint:
            raise BackendError("DOCQA_LLM_ENDPOINT is not set")
        return cls(
            endpoint=endpoint,
            model=os.environ.get("DOCQA_LLM_MODEL", ""),
            api_key=os.environ.get("DOCQA_LLM_API_KEY", ""),
            timeout_ms=int(os.environ.get("DOCQA_LLM_TIMEOUT_MS", "60000")),
        )


class HttpChatBackend:
    """OpenAI-style chat-completions client with bounded retry on transient
    status codes.  Retries resend the identical payload bytes."""

    deterministic = False

    def __init__(self, config: HttpConfig):
        self.config = config

    def chat(self, request: ChatRequest) -> ChatResponse:
        payload = json.dumps(
            {
                "model": self.config.model,
                "messages": list(request.messages),
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        timeout = self.config.timeout_ms / 1000.0
        attempt = 0
        while True:
            try:
                response = httpx.post(
                    self.config.endpoint, content=payload, headers=headers, timeout=timeout
                )
            except httpx.TimeoutException as exc:
                raise BackendTimeout(f"request timed out after {timeout}s") from exc
            if response.status_code == 200:
                body = response.json()
                text = body["choices"][0]["message"]["content"]
                usage = {k: int(v) for k, v in body.get("usage", {}).items()}
                return ChatResponse(text=text, usage=usage)
            if response.status_code in TRANSIENT_STATUS and attempt < self.config.max_retries:
                time.sleep(self.config.backoff_base_s * (2**attempt))
                attempt += 1
                continue
            raise BackendError(
                f"chat request failed with status {response.status_code}: "
                f"{response.text[:200]}",
                status=response.status_code,
            )
