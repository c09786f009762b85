"""LLM clients: a chat-completion HTTP client and a scripted stand-in for offline runs."""

import hashlib
import json
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from collections import deque
from pathlib import Path

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .config import API_KEY_VAR, AgentConfig, LLMSettings

RETRY_STATUSES = [429, 500, 502, 503, 504]

# ═══════════════════════════════════════════════════════════════════════════════
# Errors
# ═══════════════════════════════════════════════════════════════════════════════


class LLMError(Exception):
    """Base error for failed completions."""


class LLMTimeout(LLMError):
    """The endpoint did not answer within the configured timeout."""


class LLMRateLimited(LLMError):
    """The endpoint kept refusing requests (HTTP 429 or retry budget exhausted)."""


class LLMMalformed(LLMError):
    """The endpoint answered but the body holds no completion text."""


class MissingApiKey(LLMError):
    """No API key is available for the live endpoint."""


def sanitize_error(message: str) -> str:
    """Remove potential credential fragments from error messages.

    Redacts values after sensitive keys rather than discarding the whole
    message.
    """
    # "Authorization: <scheme> <token>" is redacted as a single unit
    sanitized = re.sub(
        r"(authorization:\s*)\S+(?:\s+\S+)?",
        r"\1***",
        message,
        flags=re.IGNORECASE,
    )
    sanitized = re.sub(
        r"(bearer |token=|password=|api_token=|api_key=|secret=|access_token=|apikey=|auth_token=|key=)\S+",
        r"\1***",
        sanitized,
        flags=re.IGNORECASE,
    )
    return sanitized


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class LLMClient(ABC):
    """Anything that turns a prompt into completion text."""

    @abstractmethod
    def complete(self, prompt: str) -> str:
        """Return the completion for ``prompt``.

        Raises:
            LLMError: or one of its subclasses.
        """


# ═══════════════════════════════════════════════════════════════════════════════
# Live chat-completion client
# ═══════════════════════════════════════════════════════════════════════════════


def create_retry_session(settings: LLMSettings) -> requests.Session:
    """Session whose adapter retries rate limits and transient server errors."""
    session = requests.Session()
    retry_strategy = Retry(
        total=settings.max_retries,
        backoff_factor=settings.backoff_factor,
        status_forcelist=RETRY_STATUSES,
        allowed_methods=["POST"],
    )
    adapter = HTTPAdapter(max_retries=retry_strategy)
    session.mount("https://", adapter)
    session.mount("http://", adapter)
    return session


class ChatCompletionClient(LLMClient):
    """Client for chat-completion style endpoints.

    Transport errors and retryable statuses are retried by the session's
    adapter; timeouts and malformed bodies are retried here with exponential
    backoff. A bounded semaphore caps requests in flight, so one instance can
    serve concurrently running episodes.
    """

    def __init__(
        self,
        settings: LLMSettings,
        api_key: str | None,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        if not api_key:
            raise MissingApiKey(f"MissingApiKey: set {API_KEY_VAR} to use a live endpoint")
        self.settings = settings
        self._api_key = api_key
        self.session = session or create_retry_session(settings)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(settings.max_in_flight)

    def _payload(self, prompt: str) -> dict:
        return {
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self._api_key}", "Content-Type": "application/json"}

    def _post(self, prompt: str) -> requests.Response:
        with self._slots:
            return self.session.post(
                self.settings.endpoint,
                json=self._payload(prompt),
                headers=self._headers(),
                timeout=self.settings.timeout,
            )

    @staticmethod
    def _extract(response: requests.Response) -> str:
        status = response.status_code
        if status == 429:
            raise LLMRateLimited("LLMRateLimited: endpoint answered HTTP 429")
        if status in (401, 403):
            raise LLMError(f"LLMError: endpoint rejected the API key (HTTP {status})")
        if status >= 400:
            raise LLMError(f"LLMError: endpoint answered HTTP {status}: {sanitize_error(response.text[:200])}")
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise LLMMalformed("LLMMalformed: response holds no choices[0].message.content") from None
        if not isinstance(content, str):
            raise LLMMalformed("LLMMalformed: completion content is not text")
        return content

    def complete(self, prompt: str) -> str:
        last_error: LLMError | None = None
        for attempt in range(self.settings.max_retries + 1):
            try:
                return self._extract(self._post(prompt))
            except requests.Timeout:
                last_error = LLMTimeout(f"LLMTimeout: no answer within {self.settings.timeout:g}s")
            except requests.exceptions.RetryError as e:
                raise LLMRateLimited(f"LLMRateLimited: retries exhausted: {sanitize_error(str(e))}") from None
            except requests.RequestException as e:
                raise LLMError(f"LLMError: request failed: {sanitize_error(str(e))}") from None
            except LLMMalformed as e:
                last_error = e
            if attempt < self.settings.max_retries:
                self._sleep(self.settings.backoff_factor * 2**attempt)
        assert last_error is not None
        raise last_error


# ═══════════════════════════════════════════════════════════════════════════════
# Scripted client
# ═══════════════════════════════════════════════════════════════════════════════


class ScriptedClient(LLMClient):
    """Replays canned completions.

    Lookup order per prompt: the digest table (sha256 of the prompt), then
    the ordered queue, then the fallback completion. Every prompt served is
    recorded in ``prompts``.
    """

    def __init__(self, completions=(), by_digest: dict[str, str] | None = None, fallback: str | None = None):
        self._queue = deque(completions)
        self._by_digest = dict(by_digest or {})
        self.fallback = fallback
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptedClient":
        if not isinstance(data, dict):
            raise ValueError("Scripted completions must be a JSON object")
        completions = data.get("completions", [])
        if not isinstance(completions, list) or not all(isinstance(item, str) for item in completions):
            raise ValueError("'completions' must be a list of strings")
        return cls(completions, data.get("by_digest"), data.get("fallback"))

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClient":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in {path}: {e}") from e
        return cls.from_dict(data)

    @property
    def remaining(self) -> int:
        return len(self._queue)

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
            digest = prompt_digest(prompt)
            if digest in self._by_digest:
                return self._by_digest[digest]
            if self._queue:
                return self._queue.popleft()
            if self.fallback is not None:
                return self.fallback
        raise LLMMalformed(f"LLMMalformed: scripted completions exhausted after {len(self.prompts)} prompt(s)")


def get_llm_client(config: AgentConfig, script: str | Path | None = None, environ: dict | None = None) -> LLMClient:
    """A scripted client when ``script`` is given, otherwise the live endpoint.

    Raises:
        MissingApiKey: for the live endpoint when AGENT_LLM_API_KEY is unset.
    """
    if script is not None:
        return ScriptedClient.from_file(script)
    environ = os.environ if environ is None else environ
    return ChatCompletionClient(config.llm, environ.get(API_KEY_VAR))
