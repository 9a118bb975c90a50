"""Model access layer: chat and embedding providers behind small protocols.

Both real providers speak the OpenAI-compatible HTTP API via httpx. The
transport is injectable so tests can run against httpx.MockTransport without
a network. Retries use exponential backoff through an injectable sleeper.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx

from .errors import ContextOverflow, EmptyInput, ProviderUnavailable

RETRYABLE_STATUS = {429, 500, 502, 503, 504}

# purpose tags drive default sampling temperature and let offline fakes dispatch
PURPOSE_EXTRACT = "extract"
PURPOSE_DESCRIBE = "describe"
PURPOSE_HYDE = "hyde"
PURPOSE_NAME = "name"
PURPOSE_FILL = "fill"
PURPOSE_SUBSECTION = "subsection"
PURPOSE_SUMMARY = "summary"
PURPOSE_MERGE = "merge"
PURPOSE_SECTION = "section"
PURPOSE_JUDGE = "judge"

_EXTRACTIVE = {PURPOSE_EXTRACT, PURPOSE_NAME, PURPOSE_FILL, PURPOSE_JUDGE}


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role: {self.role!r}")
        if not isinstance(self.content, str):
            raise ValueError("content must be str")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    purpose: str = PURPOSE_EXTRACT
    temperature: float | None = None  # None = derive from purpose
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise EmptyInput("chat request needs at least one message")
        if self.messages[-1].role != "user":
            raise ValueError("last chat message must come from the user")

    def resolved_temperature(self, extract_temp: float, prose_temp: float) -> float:
        if self.temperature is not None:
            return self.temperature
        return extract_temp if self.purpose in _EXTRACTIVE else prose_temp


def chat_request(prompt: str, purpose: str, system: str | None = None, **kw) -> ChatRequest:
    msgs = []
    if system:
        msgs.append(ChatMessage("system", system))
    msgs.append(ChatMessage("user", prompt))
    return ChatRequest(messages=tuple(msgs), purpose=purpose, **kw)


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


def check_texts(texts: Sequence[str]):
    if not texts:
        raise EmptyInput("embed_batch needs at least one text")
    for i, t in enumerate(texts):
        if not t or not t.strip():
            raise EmptyInput(f"text {i} is empty")


def normalize(vec: Sequence[float]) -> list[float]:
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0.0:
        # degenerate input; pin to a fixed unit axis so downstream math stays valid
        out = [0.0] * len(vec)
        if out:
            out[0] = 1.0
        return out
    return [x / norm for x in vec]


class _Gate:
    """Process-wide concurrency cap shared by all provider calls."""

    def __init__(self, cap: int):
        self._sem = threading.Semaphore(max(1, cap))

    def __enter__(self):
        self._sem.acquire()
        return self

    def __exit__(self, *exc):
        self._sem.release()
        return False


def with_retries(fn: Callable[[], httpx.Response], retry_max: int,
                 base_delay: float, sleeper: Callable[[float], None]) -> httpx.Response:
    """Run fn; on retryable failure back off base_delay * 2**attempt.

    retry_max counts retries after the initial attempt, so worst case is
    retry_max + 1 calls.
    """
    last_detail = ""
    for attempt in range(retry_max + 1):
        try:
            resp = fn()
        except httpx.HTTPError as exc:
            last_detail = f"transport error: {exc}"
            resp = None
        if resp is not None:
            if resp.status_code < 400:
                return resp
            body = resp.text[:500]
            if resp.status_code == 400 and "context" in body.lower() and "length" in body.lower():
                raise ContextOverflow(body)
            if resp.status_code not in RETRYABLE_STATUS:
                raise ProviderUnavailable(f"HTTP {resp.status_code}: {body}")
            last_detail = f"HTTP {resp.status_code}: {body}"
        if attempt < retry_max:
            sleeper(base_delay * (2 ** attempt))
    raise ProviderUnavailable(f"retries exhausted: {last_detail}")


@dataclass
class OpenAIChat:
    """Chat completions against an OpenAI-compatible endpoint."""

    base_url: str
    api_key: str
    model: str
    retry_max: int = 3
    base_delay: float = 1.0
    extract_temperature: float = 0.2
    prose_temperature: float = 0.7
    max_tokens: int = 2048
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = None
    sleeper: Callable[[float], None] = time.sleep
    gate: _Gate = field(default_factory=lambda: _Gate(4))

    def __post_init__(self):
        self._client = httpx.Client(
            base_url=self.base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
            transport=self.transport,
        )

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.resolved_temperature(
                self.extract_temperature, self.prose_temperature),
            "max_tokens": request.max_tokens or self.max_tokens,
        }

        def call():
            with self.gate:
                return self._client.post("/chat/completions", json=payload)

        resp = with_retries(call, self.retry_max, self.base_delay, self.sleeper)
        data = resp.json()
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed chat response: {exc}")
        if choice.get("finish_reason") == "length":
            raise ContextOverflow("completion truncated by token limit")
        return text


@dataclass
class OpenAIEmbeddings:
    """Embeddings against an OpenAI-compatible endpoint; vectors come back unit-norm."""

    base_url: str
    api_key: str
    model: str
    retry_max: int = 3
    base_delay: float = 1.0
    batch_size: int = 64
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = None
    sleeper: Callable[[float], None] = time.sleep
    gate: _Gate = field(default_factory=lambda: _Gate(4))
    dim: int = 0  # learned from the first response

    def __post_init__(self):
        self._client = httpx.Client(
            base_url=self.base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
            transport=self.transport,
        )

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        check_texts(texts)
        out: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start:start + self.batch_size])
            payload = {"model": self.model, "input": batch}

            def call():
                with self.gate:
                    return self._client.post("/embeddings", json=payload)

            resp = with_retries(call, self.retry_max, self.base_delay, self.sleeper)
            data = resp.json()
            try:
                rows = sorted(data["data"], key=lambda r: r["index"])
                vecs = [r["embedding"] for r in rows]
            except (KeyError, TypeError) as exc:
                raise ProviderUnavailable(f"malformed embedding response: {exc}")
            if len(vecs) != len(batch):
                raise ProviderUnavailable("embedding count mismatch")
            out.extend(normalize(v) for v in vecs)
        if out and not self.dim:
            self.dim = len(out[0])
        return out


def build_providers(settings, transport: httpx.BaseTransport | None = None,
                    sleeper: Callable[[float], None] = time.sleep):
    """Wire (chat, embedder) from settings. Fakes are selected by provider name."""
    from . import fakes

    gate = _Gate(settings.concurrency_cap)

    if settings.llm_provider == "offline":
        chat = fakes.OfflineChat(delay=settings.offline_chat_delay)
    elif settings.llm_provider == "openai":
        chat = OpenAIChat(
            base_url=settings.llm_base_url,
            api_key=settings.llm_api_key,
            model=settings.llm_model,
            retry_max=settings.retry_max,
            base_delay=settings.retry_base_delay,
            extract_temperature=settings.temperature_extract,
            prose_temperature=settings.temperature_prose,
            max_tokens=settings.max_output_tokens,
            transport=transport,
            sleeper=sleeper,
            gate=gate,
        )
    else:
        raise ValueError(f"unknown llm provider: {settings.llm_provider!r}")

    if settings.embed_provider == "hash":
        embedder = fakes.HashingEmbedder(dim=settings.embed_dim)
    elif settings.embed_provider == "openai":
        embedder = OpenAIEmbeddings(
            base_url=settings.embed_base_url,
            api_key=settings.embed_api_key,
            model=settings.embed_model,
            retry_max=settings.retry_max,
            base_delay=settings.retry_base_delay,
            transport=transport,
            sleeper=sleeper,
            gate=gate,
        )
    else:
        raise ValueError(f"unknown embed provider: {settings.embed_provider!r}")

    return chat, embedder
