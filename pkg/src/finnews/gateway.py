"""HTTP completion gateway with retries, plus a deterministic offline mock.

The wire contract is a generic text-completion POST:
request ``{"prompt", "max_new_tokens", "temperature", "stop"}``,
response ``{"text": string}``. Endpoint and key come from configuration or
the FINNEWS_LLM_URL / FINNEWS_LLM_KEY environment variables.
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
from typing import Protocol

import httpx

logger = logging.getLogger(__name__)

ENV_URL = "FINNEWS_LLM_URL"
ENV_KEY = "FINNEWS_LLM_KEY"


class GatewayError(Exception):
    """Base class for completion failures."""


class TransportError(GatewayError):
    """Network failure or timeout; retryable."""


class BackendStatusError(GatewayError):
    """Non-2xx HTTP status; 5xx retries, 4xx does not."""

    def __init__(self, status_code: int, detail: str = ""):
        super().__init__(f"backend returned status {status_code}" + (f": {detail}" if detail else ""))
        self.status_code = status_code

    @property
    def retryable(self) -> bool:
        return self.status_code >= 500


class MalformedPayloadError(GatewayError):
    """Backend response body is not the expected JSON shape."""


class FixtureMissError(GatewayError):
    """Mock backend has no fixture registered for this prompt."""


class RetriesExhaustedError(GatewayError):
    """All attempts failed; carries the last underlying error."""

    def __init__(self, attempts: int, last_error: GatewayError):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


@dataclass(frozen=True)
class GenerationParams:
    max_new_tokens: int = 512
    temperature: float = 0.0
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend_id: str
    latency: float
    attempt_count: int


class CompletionBackend(Protocol):
    backend_id: str

    def send(self, prompt: str, params: GenerationParams) -> str: ...


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpCompletionBackend:
    """POSTs prompts to a text-completion endpoint over HTTP."""

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if not url:
            raise ValueError("backend url required")
        self.url = url
        self.backend_id = f"http:{url}"
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, timeout: float = 120.0) -> "HttpCompletionBackend":
        url = os.environ.get(ENV_URL, "")
        if not url:
            raise ValueError(f"{ENV_URL} is not set")
        return cls(url, api_key=os.environ.get(ENV_KEY) or None, timeout=timeout)

    def send(self, prompt: str, params: GenerationParams) -> str:
        payload = {
            "prompt": prompt,
            "max_new_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "stop": list(params.stop_sequences),
        }
        try:
            response = self._client.post(self.url, json=payload)
        except httpx.TimeoutException as exc:
            raise TransportError(f"timeout: {exc}") from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code < 200 or response.status_code >= 300:
            raise BackendStatusError(response.status_code, response.text[:200])
        try:
            body = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise MalformedPayloadError(f"response body is not JSON: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise MalformedPayloadError('response JSON lacks a string "text" field')
        return body["text"]

    def close(self) -> None:
        self._client.close()


class MockBackend:
    """Offline backend answering from a fixture registry keyed by prompt hash."""

    backend_id = "mock"

    def __init__(self) -> None:
        self._fixtures: dict[str, str] = {}
        self._lock = threading.Lock()

    def register_fixture(self, prompt: str, response_text: str) -> str:
        """Register (or replace, with a warning) the response for a prompt."""
        key = prompt_sha256(prompt)
        with self._lock:
            if key in self._fixtures:
                logger.warning("replacing fixture for prompt hash %s", key[:12])
            self._fixtures[key] = response_text
        return key

    def send(self, prompt: str, params: GenerationParams) -> str:
        key = prompt_sha256(prompt)
        with self._lock:
            if key not in self._fixtures:
                raise FixtureMissError(f"no fixture for prompt hash {key[:12]}")
            return self._fixtures[key]

    def load_fixture_file(self, path: str | Path) -> int:
        """Load JSONL fixtures of {"prompt_sha256", "text"}; returns the count."""
        count = 0
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                with self._lock:
                    self._fixtures[obj["prompt_sha256"]] = obj["text"]
                count += 1
        return count

    def dump_fixture_file(self, path: str | Path) -> int:
        with self._lock:
            items = sorted(self._fixtures.items())
        with Path(path).open("w", encoding="utf-8") as handle:
            for key, text in items:
                handle.write(json.dumps({"prompt_sha256": key, "text": text}, ensure_ascii=False))
                handle.write("\n")
        return len(items)


class Gateway:
    """Dispatches prompts to a backend with bounded retries and backoff.

    Retries fire only on transport errors and 5xx statuses; 4xx, malformed
    payloads, and fixture misses surface immediately. Responses are returned
    verbatim — parsing tolerance belongs to the report parser.
    """

    def __init__(
        self,
        backend: CompletionBackend,
        max_retries: int = 3,
        backoff_base: float = 1.0,
    ):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.backend = backend
        self.max_retries = max_retries
        self.backoff_base = backoff_base

    def complete(self, prompt: str, params: GenerationParams) -> CompletionResult:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        started = time.perf_counter()
        last_error: GatewayError | None = None
        for attempt in range(1, self.max_retries + 2):
            try:
                text = self.backend.send(prompt, params)
            except (TransportError, BackendStatusError) as exc:
                if isinstance(exc, BackendStatusError) and not exc.retryable:
                    raise
                last_error = exc
                if attempt <= self.max_retries:
                    time.sleep(self.backoff_base * (2 ** (attempt - 1)))
                    continue
                raise RetriesExhaustedError(attempt, exc) from exc
            return CompletionResult(
                text=text,
                backend_id=self.backend.backend_id,
                latency=time.perf_counter() - started,
                attempt_count=attempt,
            )
        raise RetriesExhaustedError(self.max_retries + 1, last_error or TransportError("unknown"))

    def complete_batch(
        self,
        prompts: list[str],
        params: GenerationParams,
        parallelism: int = 1,
    ) -> list[CompletionResult | GatewayError]:
        """Complete prompts with at most `parallelism` requests in flight.

        Results align positionally with the inputs; a failed item carries
        its GatewayError in place without aborting the rest of the batch.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        results: list[CompletionResult | GatewayError] = [None] * len(prompts)  # type: ignore[list-item]

        def run(index: int, prompt: str) -> None:
            try:
                results[index] = self.complete(prompt, params)
            except GatewayError as exc:
                results[index] = exc

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(run, i, p) for i, p in enumerate(prompts)]
            for future in futures:
                future.result()
        return results
