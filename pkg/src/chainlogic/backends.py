"""Model invocation: HTTP chat-completions client, scripted test backend,
and a content-addressed on-disk response cache with replay.

Cache keys are SHA-256 digests of the canonical (sorted-key) JSON of the
request identity: backend id, model, temperature, max_tokens, stop and
prompt bytes. Entries are one JSON file per digest, written atomically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
API_KEY_ENV = "OPENAI_API_KEY"
BASE_URL_ENV = "OPENAI_BASE_URL"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class BackendError(Exception):
    """Base class for generation failures."""


class TransportError(BackendError):
    pass


class AuthenticationError(BackendError):
    pass


class RateLimitExhaustedError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


class UnscriptedPromptError(BackendError):
    def __init__(self, digest: str):
        super().__init__(f"no scripted response for prompt (sha256 {digest})")
        self.digest = digest


class ReplayMissError(BackendError):
    def __init__(self, key: str):
        super().__init__(f"replay cache has no entry for key {key}")
        self.key = key


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 1024
    stop_sequences: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.stop_sequences is not None:
            object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


class Backend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def cache_key(backend_id: str, request: GenerationRequest) -> str:
    identity = {
        "backend": backend_id,
        "model": request.model_name,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "stop": list(request.stop_sequences) if request.stop_sequences else None,
        "prompt": request.prompt,
    }
    canonical = json.dumps(identity, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ScriptedBackend:
    """Deterministic table-lookup backend; keeps the test suite hermetic.

    Responses are keyed by the exact prompt or by "sha256:<hex>" of it.
    """

    backend_id = "scripted"

    def __init__(self, responses: Mapping[str, str] | None = None):
        self._responses: dict[str, str] = dict(responses or {})
        self._lock = threading.Lock()
        self.calls = 0

    def register(self, prompt: str, response: str) -> None:
        self._responses[prompt] = response

    def generate(self, request: GenerationRequest) -> str:
        with self._lock:
            self.calls += 1
        if request.prompt in self._responses:
            return self._responses[request.prompt]
        digest = prompt_digest(request.prompt)
        keyed = f"sha256:{digest}"
        if keyed in self._responses:
            return self._responses[keyed]
        raise UnscriptedPromptError(digest)


class HttpBackend:
    """OpenAI-compatible chat-completions client; one user message per request."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep
        self.backend_id = f"http:{self.base_url}"

    def _payload(self, request: GenerationRequest) -> dict:
        payload: dict = {
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)
        return payload

    def generate(self, request: GenerationRequest) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last_error: BackendError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._client.post(url, json=self._payload(request), headers=headers)
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
                continue
            if response.status_code in (401, 403):
                raise AuthenticationError(f"HTTP {response.status_code}: {response.text[:200]}")
            if response.status_code == 429:
                last_error = RateLimitExhaustedError(f"HTTP 429: {response.text[:200]}")
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                data = response.json()
                content = data["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                raise MalformedResponseError(f"unexpected response body: {exc}") from exc
            if not isinstance(content, str):
                raise MalformedResponseError("message content is not a string")
            return content
        assert last_error is not None
        raise last_error


class ResponseCache:
    """One JSON file per entry, named by hex digest; atomic writes."""

    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        try:
            if not path.exists():
                return None
            entry = json.loads(path.read_text(encoding="utf-8"))
            return entry["response"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            logger.warning("cache read failed for %s: %s", key, exc)
            return None

    def put(self, key: str, request: GenerationRequest, backend_id: str, response: str) -> None:
        entry = {
            "key": key,
            "request": {
                "backend": backend_id,
                "model": request.model_name,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "stop": list(request.stop_sequences) if request.stop_sequences else None,
                "prompt": request.prompt,
            },
            "response": response,
            "created_at": time.time(),
            "token_usage": None,
        }
        path = self._path(key)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        try:
            tmp.write_text(json.dumps(entry, sort_keys=True), encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            logger.warning("cache write failed for %s: %s", key, exc)
            tmp.unlink(missing_ok=True)


def cached_generate(
    backend: Backend,
    request: GenerationRequest,
    cache: ResponseCache,
    replay: bool = False,
) -> tuple[str, bool]:
    """Cache lookup, then backend call; in replay mode a miss is an error."""
    key = cache_key(backend.backend_id, request)
    cached = cache.get(key)
    if cached is not None:
        return cached, True
    if replay:
        raise ReplayMissError(key)
    response = backend.generate(request)
    cache.put(key, request, backend.backend_id, response)
    return response, False
