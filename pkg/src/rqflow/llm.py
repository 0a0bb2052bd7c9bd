"""Chat-completion and embedding providers.

Only this module knows wire details.  ``HttpProvider`` speaks an
OpenAI-style JSON protocol; ``ScriptedProvider`` replays canned replies
and table-driven embeddings so the whole engine can run offline and
deterministically.  Transient transport failures are retried with full-
jitter exponential backoff; 4xx-class rejections are never retried.
"""

from __future__ import annotations

import hashlib
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

import requests

BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_S = 8.0


class LlmError(Exception):
    pass


class TransportError(LlmError):
    """Transient failure (timeout, connection reset, 5xx): retryable."""


class Timeout(TransportError):
    pass


class ProviderRejected(LlmError):
    """Non-retryable 4xx-class rejection."""

    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"provider rejected request: {status}")
        self.status = status
        self.body = body


class RetriesExhausted(LlmError):
    def __init__(self, attempts: int, last: Exception) -> None:
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts
        self.last = last


class DimMismatch(LlmError):
    pass


class ScriptExhausted(LlmError):
    pass


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise ValueError(f"{self.role.value} message content must be non-empty")


def system(content: str) -> ChatMessage:
    return ChatMessage(Role.SYSTEM, content)


def user(content: str) -> ChatMessage:
    return ChatMessage(Role.USER, content)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values or not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be non-empty and finite")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.openai.com/v1"
    chat_model: str = "gpt-3.5-turbo-16k"
    embed_model: str = "text-embedding-ada-002"
    api_key_env: str = "RQFLOW_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class Provider(Protocol):
    def chat(self, messages: Sequence[ChatMessage]) -> str: ...

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def _check_chat_preconditions(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("message list must be non-empty")
    if messages[0].role is not Role.SYSTEM:
        raise ValueError("message list must begin with a system message")


def _check_embed_preconditions(texts: Sequence[str]) -> None:
    if not texts:
        raise ValueError("texts must be non-empty")
    if any(not t for t in texts):
        raise ValueError("every text to embed must be non-empty")


def with_retries(
    attempt: Callable[[], object],
    max_retries: int,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
):
    """Run ``attempt`` retrying TransportError up to ``max_retries`` times.

    Total attempts = max_retries + 1.  Full-jitter backoff: sleep a
    uniform fraction of min(cap, base * factor**n) between attempts.
    """
    rng = rng or random.Random()
    last: Exception | None = None
    for n in range(max_retries + 1):
        try:
            return attempt()
        except TransportError as exc:
            last = exc
            if n == max_retries:
                break
            delay = min(BACKOFF_CAP_S, BACKOFF_BASE_S * BACKOFF_FACTOR**n)
            sleep(rng.uniform(0.0, delay))
    assert last is not None
    raise RetriesExhausted(max_retries + 1, last)


def chat_complete(messages: Sequence[ChatMessage], provider: Provider) -> str:
    """Contract wrapper: validated chat call returning raw assistant text."""
    _check_chat_preconditions(messages)
    return provider.chat(messages)


def embed_texts(texts: Sequence[str], provider: Provider) -> list[EmbeddingVector]:
    """Contract wrapper: one vector per text, order-preserving, uniform dim."""
    _check_embed_preconditions(texts)
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise DimMismatch(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimMismatch(f"ragged vector dims from provider: {sorted(dims)}")
    return vectors


class HttpProvider:
    """OpenAI-style HTTP JSON adapter with retrying transport.

    The API key is read from the environment variable named in config at
    call time and never persisted anywhere.
    """

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None) -> None:
        self.config = config
        self._http = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        def attempt() -> dict:
            try:
                resp = self._http.post(
                    self.config.endpoint.rstrip("/") + path,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
            except requests.Timeout as exc:
                raise Timeout(str(exc)) from exc
            except requests.RequestException as exc:
                raise TransportError(str(exc)) from exc
            if 400 <= resp.status_code < 500:
                raise ProviderRejected(resp.status_code, resp.text)
            if resp.status_code >= 500:
                raise TransportError(f"server error {resp.status_code}")
            return resp.json()

        return with_retries(attempt, self.config.max_retries)  # type: ignore[return-value]

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        _check_chat_preconditions(messages)
        body = self._post(
            "/chat/completions",
            {
                "model": self.config.chat_model,
                "temperature": self.config.temperature,
                "messages": [{"role": m.role.value, "content": m.content} for m in messages],
            },
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderRejected(200, f"malformed chat payload: {body!r}") from exc

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_embed_preconditions(texts)
        body = self._post("/embeddings", {"model": self.config.embed_model, "input": list(texts)})
        try:
            rows = sorted(body["data"], key=lambda r: r["index"])
            return [EmbeddingVector(tuple(float(x) for x in r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderRejected(200, f"malformed embedding payload: {body!r}") from exc


def hashed_unit_vector(text: str, dim: int = 32) -> EmbeddingVector:
    """Deterministic unit vector derived from sha256 of the text.

    Stable across runs, machines, and library versions: components come
    straight from hash bytes, not from any RNG.
    """
    raw: list[float] = []
    counter = 0
    while len(raw) < dim:
        digest = hashlib.sha256(f"{text}\x00{counter}".encode("utf-8")).digest()
        for i in range(0, len(digest) - 3, 4):
            chunk = int.from_bytes(digest[i : i + 4], "little")
            raw.append(chunk / 2**31 - 1.0)  # [-1, 1)
            if len(raw) == dim:
                break
        counter += 1
    norm = math.sqrt(sum(v * v for v in raw))
    if norm == 0.0:  # astronomically unlikely; keep the contract total
        raw[0] = 1.0
        norm = 1.0
    return EmbeddingVector(tuple(v / norm for v in raw))


@dataclass
class ScriptedProvider:
    """Offline provider replaying canned chat replies.

    Chat replies are consumed in order, or keyed by a sha256 of the
    prompt when ``keyed`` is set.  Embeddings come from ``vectors`` with
    a hash-seeded deterministic unit vector for unknown texts.
    ``chat_delay`` injects per-call latency for liveness tests.
    """

    replies: list[str] = field(default_factory=list)
    keyed: dict[str, str] = field(default_factory=dict)
    vectors: dict[str, Sequence[float]] = field(default_factory=dict)
    dim: int = 32
    chat_delay: float = 0.0

    def __post_init__(self) -> None:
        self._cursor = 0
        self._lock = threading.Lock()
        self.chat_calls = 0

    @staticmethod
    def prompt_key(messages: Sequence[ChatMessage]) -> str:
        joined = "\x1e".join(f"{m.role.value}\x1f{m.content}" for m in messages)
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        _check_chat_preconditions(messages)
        with self._lock:
            self.chat_calls += 1
            if self.keyed:
                key = self.prompt_key(messages)
                if key not in self.keyed:
                    raise ScriptExhausted(f"no scripted reply for prompt key {key}")
                reply = self.keyed[key]
            else:
                if self._cursor >= len(self.replies):
                    raise ScriptExhausted(
                        f"script has {len(self.replies)} replies; call {self._cursor + 1} arrived"
                    )
                reply = self.replies[self._cursor]
                self._cursor += 1
        if self.chat_delay > 0:
            time.sleep(self.chat_delay)  # outside the lock: calls overlap
        return reply

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_embed_preconditions(texts)
        out: list[EmbeddingVector] = []
        for t in texts:
            if t in self.vectors:
                out.append(EmbeddingVector(tuple(float(x) for x in self.vectors[t])))
            else:
                out.append(hashed_unit_vector(t, self.dim))
        return out
