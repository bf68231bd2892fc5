"""Chat-completion gateway: live HTTP, scripted backends, record/replay cassettes.

The gateway is the only place completions come from. In ``record`` mode every
exchange is appended to a cassette; in ``replay`` mode the cassette answers
requests by content digest, falling back to recorded order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .core import SearchError

log = logging.getLogger(__name__)

API_KEY_ENV = "BRANCHSEARCH_API_KEY"
FALLBACK_API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_MODEL = "gpt-3.5-turbo"
DEFAULT_BASE_URL = "https://api.openai.com"


class TransportError(SearchError):
    code = "transport_error"


class ReplayMiss(SearchError):
    code = "replay_miss"


class MalformedResponse(SearchError):
    code = "malformed_response"


ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content and self.role != "assistant":
            raise ValueError(f"empty {self.role} message")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    model: str = DEFAULT_MODEL

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, ChatMessage) else ChatMessage(**m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        object.__setattr__(self, "temperature", float(self.temperature))
        if not msgs:
            raise ValueError("a request needs at least one message")
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    @property
    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)

    def to_dict(self) -> dict:
        return {
            "messages": [m.to_dict() for m in self.messages],
            "temperature": self.temperature,
            "model": self.model,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChatRequest":
        return cls(
            messages=tuple(ChatMessage(m["role"], m["content"]) for m in data["messages"]),
            temperature=float(data.get("temperature", 0.7)),
            model=data.get("model", DEFAULT_MODEL),
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChatResponse":
        return cls(data["content"], int(data.get("prompt_tokens", 0)), int(data.get("completion_tokens", 0)))


def _request_obj(request: ChatRequest | Mapping[str, Any] | str) -> dict:
    if isinstance(request, ChatRequest):
        return request.to_dict()
    if isinstance(request, str):
        request = json.loads(request)
    req = dict(request)
    # Normalize numeric temperature so 1 and 1.0 hash alike.
    if "temperature" in req:
        req["temperature"] = float(req["temperature"])
    return req


def canonical_digest(request: ChatRequest | Mapping[str, Any] | str) -> str:
    """SHA-256 over the key-sorted, whitespace-free JSON form of a request."""
    canon = json.dumps(_request_obj(request), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatExchange:
    request: ChatRequest
    response: ChatResponse
    request_digest: str

    @classmethod
    def of(cls, request: ChatRequest, response: ChatResponse) -> "ChatExchange":
        return cls(request, response, canonical_digest(request))

    def to_dict(self) -> dict:
        return {
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
            "request_digest": self.request_digest,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChatExchange":
        req = ChatRequest.from_dict(data["request"])
        return cls(req, ChatResponse.from_dict(data["response"]), data.get("request_digest") or canonical_digest(req))


class Mode(str, Enum):
    RECORD = "record"
    REPLAY = "replay"
    LIVE = "live"


class Cassette:
    """Ordered list of exchanges, loadable from and savable to JSONL."""

    def __init__(self, exchanges: Iterable[ChatExchange] = (), mode: Mode | str = Mode.REPLAY):
        self.exchanges: list[ChatExchange] = list(exchanges)
        self.mode = Mode(mode)

    def __len__(self) -> int:
        return len(self.exchanges)

    @classmethod
    def load(cls, path: str | Path, mode: Mode | str = Mode.REPLAY) -> "Cassette":
        exchanges = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    exchanges.append(ChatExchange.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise MalformedResponse(f"{path}:{lineno}: bad cassette entry ({exc})") from None
        return cls(exchanges, mode)

    def dumps(self) -> str:
        return "".join(json.dumps(e.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for e in self.exchanges)

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.dumps(), encoding="utf-8")


# ---------------------------------------------------------------------------
# Backends


class Backend(Protocol):
    def __call__(self, request: ChatRequest) -> ChatResponse: ...


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def estimate_tokens(text: str) -> int:
    """Rough token count (words plus punctuation marks) for offline backends."""
    return len(_TOKEN_RE.findall(text))


class ScriptedBackend:
    """Deterministic backend driven by a responder function or a fixed script.

    A sequence is consumed in order and raises :class:`ReplayMiss` once empty.
    A callable receives the :class:`ChatRequest` and returns the reply text.
    """

    def __init__(self, responder: Callable[[ChatRequest], str] | Sequence[str]):
        self._lock = threading.Lock()
        if callable(responder):
            self._fn = responder
            self._script = None
        else:
            self._fn = None
            self._script = list(responder)
        self.calls = 0

    def __call__(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            if self._fn is None:
                if not self._script:
                    raise ReplayMiss("scripted backend has no replies left")
                content = self._script.pop(0)
            else:
                content = None
        if content is None:
            content = self._fn(request)
        return ChatResponse(content, estimate_tokens(request.prompt_text), estimate_tokens(content))


def parse_wire_response(payload: Any) -> ChatResponse:
    """Pull content and usage out of an OpenAI-style chat-completions body."""
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponse("response lacks choices[0].message.content") from None
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    usage = payload.get("usage") or {}
    try:
        pt = int(usage.get("prompt_tokens", 0))
        ct = int(usage.get("completion_tokens", 0))
    except (TypeError, ValueError):
        raise MalformedResponse("usage counts are not integers") from None
    if pt < 0 or ct < 0:
        raise MalformedResponse("negative usage counts")
    return ChatResponse(content, pt, ct)


class HttpBackend:
    """POST to ``<base_url>/v1/chat/completions`` with bearer auth.

    Transport failures, 429 and 5xx are retried with exponential backoff;
    after ``max_attempts`` the last failure surfaces as :class:`TransportError`.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        max_tokens: int | None = None,
        sleep: Callable[[float], None] = time.sleep,
        client: httpx.Client | None = None,
    ):
        self.base_url = (base_url or os.environ.get("BRANCHSEARCH_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else (
            os.environ.get(API_KEY_ENV) or os.environ.get(FALLBACK_API_KEY_ENV, "")
        )
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.max_tokens = max_tokens
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)

    @property
    def url(self) -> str:
        if self.base_url.endswith("/v1"):
            return self.base_url + "/chat/completions"
        return self.base_url + "/v1/chat/completions"

    def __call__(self, request: ChatRequest) -> ChatResponse:
        body = request.to_dict()
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: str = ""
        for attempt in range(self.max_attempts):
            try:
                resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        payload = resp.json()
                    except ValueError:
                        raise MalformedResponse("response body is not JSON") from None
                    return parse_wire_response(payload)
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code != 429 and resp.status_code < 500:
                    raise TransportError(last)
            log.warning("chat completion attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last)
            if attempt + 1 < self.max_attempts:
                self._sleep(self.backoff * 2**attempt)
        raise TransportError(f"gave up after {self.max_attempts} attempts: {last}")


# ---------------------------------------------------------------------------
# Gateway


class Gateway:
    """Uniform completion entry point; thread-safe.

    Args:
        mode: ``live`` calls the backend, ``record`` calls it and appends to the
            cassette, ``replay`` answers only from the cassette.
        backend: required for ``live``/``record``.
        cassette: replay source or record sink. Created empty for ``record``.
        cassette_path: in record mode each new exchange is appended here.
    """

    def __init__(
        self,
        mode: Mode | str = Mode.LIVE,
        backend: Backend | None = None,
        cassette: Cassette | None = None,
        cassette_path: str | Path | None = None,
        model: str = DEFAULT_MODEL,
    ):
        self.mode = Mode(mode)
        self.backend = backend
        self.model = model
        if self.mode is not Mode.REPLAY and backend is None:
            raise ValueError(f"{self.mode.value} mode needs a backend")
        if self.mode is Mode.REPLAY and cassette is None:
            if cassette_path is None:
                raise ValueError("replay mode needs a cassette")
            cassette = Cassette.load(cassette_path)
        self.cassette = cassette if cassette is not None else Cassette(mode=self.mode)
        self.cassette_path = Path(cassette_path) if cassette_path else None
        if self.mode is Mode.RECORD and self.cassette_path is not None:
            self.cassette_path.parent.mkdir(parents=True, exist_ok=True)
            self.cassette_path.write_text(self.cassette.dumps(), encoding="utf-8")
        self._lock = threading.Lock()
        self._consumed: set[int] = set()
        self.history: list[ChatExchange] = []

    @classmethod
    def scripted(cls, responder, *, record: bool = True, model: str = DEFAULT_MODEL) -> "Gateway":
        """Gateway over a :class:`ScriptedBackend`, recording by default."""
        return cls(Mode.RECORD if record else Mode.LIVE, ScriptedBackend(responder), model=model)

    @classmethod
    def replay(cls, cassette: Cassette | str | Path) -> "Gateway":
        if isinstance(cassette, Cassette):
            return cls(Mode.REPLAY, cassette=cassette)
        return cls(Mode.REPLAY, cassette_path=cassette)

    def request(self, messages: Sequence[ChatMessage | Mapping[str, str]], temperature: float = 0.7) -> ChatRequest:
        return ChatRequest(tuple(messages), float(temperature), self.model)

    def complete(self, request: ChatRequest) -> ChatResponse:
        if self.mode is Mode.REPLAY:
            response = self._replay(request)
        else:
            response = self.backend(request)
        exchange = ChatExchange.of(request, response)
        with self._lock:
            self.history.append(exchange)
            if self.mode is Mode.RECORD:
                self.cassette.exchanges.append(exchange)
                if self.cassette_path is not None:
                    with open(self.cassette_path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps(exchange.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        return response

    def _replay(self, request: ChatRequest) -> ChatResponse:
        digest = canonical_digest(request)
        with self._lock:
            fallback = None
            for i, ex in enumerate(self.cassette.exchanges):
                if i in self._consumed:
                    continue
                if ex.request_digest == digest:
                    self._consumed.add(i)
                    return ex.response
                if fallback is None:
                    fallback = i
            if fallback is None:
                raise ReplayMiss(f"no recorded exchange left for request {digest[:12]}")
            log.debug("replay digest miss for %s; using exchange %d in order", digest[:12], fallback)
            self._consumed.add(fallback)
            return self.cassette.exchanges[fallback].response

    def prompts(self) -> list[str]:
        """Prompt texts of every exchange seen by this gateway, in call order."""
        with self._lock:
            return [ex.request.prompt_text for ex in self.history]
