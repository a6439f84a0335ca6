"""Completion-endpoint client with retries, plus a scriptable mock transport.

Wire format (HTTP transport): POST {base_url}/completions with JSON body
``{"model", "prompt", "n", "temperature", "max_tokens"}`` and an optional
``Authorization: Bearer <key>`` header; the response must carry
``{"choices": [{"text": ...}, ...]}``.  Base URL, model id, and key come from
the ELM_LLM_URL / ELM_LLM_MODEL / ELM_LLM_KEY environment variables unless
given explicitly.  Everything above the transport is deterministic, so tests
swap in `MockTransport` and never touch the network.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import requests

DEFAULT_TEMPERATURE = 0.8
DEFAULT_MAX_TOKENS = 1024
DEFAULT_TIMEOUT = 60.0
RETRY_DELAYS = (1.0, 2.0, 4.0)

ENV_URL = "ELM_LLM_URL"
ENV_MODEL = "ELM_LLM_MODEL"
ENV_KEY = "ELM_LLM_KEY"


class TransportError(Exception):
    """The transport failed to deliver completions (after any internal cause)."""


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    n: int = 1
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need n >= 1 completions")


@dataclass
class LlmResponse:
    completions: list[str]
    usage: dict = field(default_factory=dict)


class HttpTransport:
    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = (base_url or os.environ.get(ENV_URL, "")).rstrip("/")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key or os.environ.get(ENV_KEY)
        self.timeout = timeout
        self._session = session or requests.Session()
        if not self.base_url:
            raise TransportError(f"no completion endpoint configured (set {ENV_URL})")

    def complete(self, request: LlmRequest) -> LlmResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "prompt": request.prompt,
            "n": request.n,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = self._session.post(
                f"{self.base_url}/completions", json=body,
                headers=headers, timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        except ValueError as exc:
            raise TransportError(f"non-JSON completion response: {exc}") from exc
        try:
            completions = [choice["text"] for choice in payload["choices"]]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        return LlmResponse(completions, usage=payload.get("usage", {}))


class MockTransport:
    """Deterministic stand-in; takes a completion list or a prompt → text callable."""

    def __init__(self, script: Sequence[str] | Callable[[str], str]) -> None:
        self._fn = script if callable(script) else None
        self._queue = None if callable(script) else list(script)
        self.calls: list[LlmRequest] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.calls.append(request)
        out = []
        for _ in range(request.n):
            if self._fn is not None:
                out.append(self._fn(request.prompt))
            else:
                if not self._queue:
                    raise TransportError("mock script exhausted")
                out.append(self._queue.pop(0))
        return LlmResponse(out)


class LlmClient:
    """Retrying wrapper: up to len(RETRY_DELAYS) retries at 1s/2s/4s backoff."""

    def __init__(
        self,
        transport,
        retry_delays: Sequence[float] = RETRY_DELAYS,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.transport = transport
        self.retry_delays = tuple(retry_delays)
        self._sleep = sleep

    def complete(
        self,
        prompt: str,
        n: int = 1,
        temperature: float = DEFAULT_TEMPERATURE,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ) -> LlmResponse:
        request = LlmRequest(prompt, n, temperature, max_tokens)
        last: TransportError | None = None
        for attempt in range(len(self.retry_delays) + 1):
            try:
                return self.transport.complete(request)
            except TransportError as exc:
                last = exc
                if attempt < len(self.retry_delays):
                    self._sleep(self.retry_delays[attempt])
        raise TransportError(f"gave up after {len(self.retry_delays) + 1} attempts: {last}")


def client_from_env(**kwargs) -> LlmClient:
    return LlmClient(HttpTransport(**kwargs))
