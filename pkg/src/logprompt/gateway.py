"""Backend-agnostic completion with format-validated, temperature-escalating retries."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .core import ParsedAnswer
from .prompts import PromptSpec

logger = logging.getLogger(__name__)

Validator = Callable[[str], tuple[list[ParsedAnswer], Any, bool]]


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """Network failure or timeout; safe to retry."""


class AuthError(GatewayError):
    pass


class FixtureMissingError(GatewayError):
    pass


def prompt_digest(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"  # "http_chat" | "scripted"
    endpoint: str = ""
    model_name: str = ""
    auth: str = "OPENAI_API_KEY"  # name of the environment variable holding the key
    timeout: float = 60.0
    max_retries: int = 5
    initial_temperature: float = 0.5
    temperature_step: float = 0.4
    temperature_cap: float = 2.0
    retry_mode: str = "add"  # "add" | "set"
    min_interval: float = 0.0
    workers: int = 1
    transport_retries: int = 3
    transport_backoff: float = 1.0
    fixtures: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("http_chat", "scripted"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not 0 <= self.initial_temperature <= self.temperature_cap:
            raise ValueError("initial temperature must lie in [0, temperature_cap]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.retry_mode not in ("add", "set"):
            raise ValueError(f"retry_mode must be 'add' or 'set', got {self.retry_mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def next_temperature(self, previous: float) -> float:
        if self.retry_mode == "set":
            return min(self.temperature_step, self.temperature_cap)
        return min(round(previous + self.temperature_step, 10), self.temperature_cap)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Attempt:
    temperature: float
    response: str
    format_valid: bool

    def to_dict(self) -> dict[str, Any]:
        return {"temperature": self.temperature, "response": self.response, "format_valid": self.format_valid}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Attempt:
        return cls(d["temperature"], d["response"], d["format_valid"])


@dataclass
class RunRecord:
    prompt: PromptSpec
    attempts: list[Attempt] = field(default_factory=list)
    final: str | None = None
    failure: str | None = None
    wall_time: float = 0.0
    batch: int | None = None

    @property
    def ok(self) -> bool:
        return self.final is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "batch": self.batch,
            "prompt": self.prompt.to_dict(),
            "attempts": [a.to_dict() for a in self.attempts],
            "final": self.final,
            "failure": self.failure,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunRecord:
        return cls(
            prompt=PromptSpec.from_dict(d["prompt"]),
            attempts=[Attempt.from_dict(a) for a in d["attempts"]],
            final=d.get("final"),
            failure=d.get("failure"),
            wall_time=d.get("wall_time", 0.0),
            batch=d.get("batch"),
        )


class ScriptedBackend:
    """Replays canned responses keyed by the SHA-256 of the prompt text.

    A fixture value may be a list; successive calls with the same prompt walk
    through it and keep returning the last entry. ``responder`` is consulted
    for prompts that have no fixture.
    """

    def __init__(
        self,
        fixtures: dict[str, str | list[str]] | None = None,
        responder: Callable[[str], str | None] | None = None,
    ) -> None:
        self.fixtures = dict(fixtures or {})
        self.responder = responder
        self.calls: list[tuple[str, float]] = []
        self._served: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> ScriptedBackend:
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.fixtures, fh, indent=1, sort_keys=True, ensure_ascii=False)

    def add(self, prompt_text: str, response: str | list[str]) -> None:
        self.fixtures[prompt_digest(prompt_text)] = response

    def complete(self, prompt_text: str, temperature: float) -> str:
        key = prompt_digest(prompt_text)
        with self._lock:
            self.calls.append((key, temperature))
            if key in self.fixtures:
                value = self.fixtures[key]
                if isinstance(value, str):
                    return value
                n = self._served.get(key, 0)
                self._served[key] = n + 1
                return value[min(n, len(value) - 1)]
        if self.responder is not None:
            response = self.responder(prompt_text)
            if response is not None:
                with self._lock:
                    self.fixtures.setdefault(key, response)
                return response
        raise FixtureMissingError(f"no scripted response for prompt digest {key[:12]}")


class HttpChatBackend:
    """Chat-completions client: one user message, sampling temperature as given."""

    def __init__(self, endpoint: str, model_name: str, api_key: str | None, timeout: float) -> None:
        if not endpoint:
            raise ValueError("http_chat backend needs an endpoint URL")
        self.endpoint = endpoint
        self.model_name = model_name
        self.api_key = api_key
        self.timeout = timeout

    def request_body(self, prompt_text: str, temperature: float) -> dict[str, Any]:
        return {
            "model": self.model_name,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt_text}],
        }

    def complete(self, prompt_text: str, temperature: float) -> str:
        body = json.dumps(self.request_body(prompt_text, temperature)).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthError(f"backend rejected credentials (HTTP {exc.code})") from exc
            if exc.code == 429 or exc.code >= 500:
                raise TransportError(f"HTTP {exc.code} from backend") from exc
            raise GatewayError(f"HTTP {exc.code} from backend") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransportError(f"cannot reach {self.endpoint}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise TransportError("backend returned a non-JSON body") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"unexpected response shape: {str(payload)[:200]}") from exc


def make_backend(config: BackendConfig):
    if config.kind == "scripted":
        return ScriptedBackend.from_file(config.fixtures) if config.fixtures else ScriptedBackend()
    return HttpChatBackend(config.endpoint, config.model_name, os.environ.get(config.auth), config.timeout)


class Gateway:
    def __init__(self, config: BackendConfig, backend=None) -> None:
        self.config = config
        self.backend = backend if backend is not None else make_backend(config)
        self._lock = threading.Lock()
        self._last_request = 0.0

    def _throttle(self) -> None:
        if self.config.min_interval <= 0:
            return
        with self._lock:
            wait = self._last_request + self.config.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def complete(self, prompt_text: str, temperature: float) -> str:
        if not prompt_text:
            raise ValueError("prompt text must be non-empty")
        delay = self.config.transport_backoff
        for attempt in range(self.config.transport_retries + 1):
            self._throttle()
            try:
                return self.backend.complete(prompt_text, temperature)
            except TransportError as exc:
                if attempt == self.config.transport_retries:
                    raise
                logger.warning("transport error (%s); retrying in %.1fs", exc, delay)
                time.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    def query(self, prompt: PromptSpec, validator: Validator, batch: int | None = None) -> tuple[list[ParsedAnswer], RunRecord]:
        """Query until the response passes ``validator`` or retries run out.

        The prompt bytes never change between attempts; only the temperature
        does. On exhaustion the record carries a failure marker and no answers
        are returned.
        """
        record = RunRecord(prompt=prompt, batch=batch)
        text = prompt.text
        temperature = self.config.initial_temperature
        started = time.perf_counter()
        try:
            for n in range(self.config.max_retries + 1):
                if n:
                    temperature = self.config.next_temperature(temperature)
                raw = self.complete(text, temperature)
                answers, _diag, ok = validator(raw)
                record.attempts.append(Attempt(temperature, raw, ok))
                if ok:
                    record.final = raw
                    return answers, record
                logger.info("batch %s: invalid response format at temperature %.2f", batch, temperature)
            record.failure = "format_retries_exhausted"
        except TransportError as exc:
            record.failure = f"transport: {exc}"
        finally:
            record.wall_time = time.perf_counter() - started
        return [], record

    def query_many(
        self, prompts: Sequence[PromptSpec], validators: Sequence[Validator]
    ) -> list[tuple[list[ParsedAnswer], RunRecord]]:
        """Run batches through up to ``workers`` concurrent queries; results keep batch order."""
        jobs = list(zip(prompts, validators))
        if self.config.workers == 1:
            return [self.query(p, v, batch=i) for i, (p, v) in enumerate(jobs)]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            futures = [pool.submit(self.query, p, v, i) for i, (p, v) in enumerate(jobs)]
            return [f.result() for f in futures]


def query_with_retry(
    gateway: Gateway, prompt: PromptSpec, expected_n: int, validator: Validator
) -> tuple[list[ParsedAnswer], RunRecord]:
    answers, record = gateway.query(prompt, validator)
    if record.ok and len(answers) != expected_n:
        raise GatewayError(f"validator accepted {len(answers)} answers, expected {expected_n}")
    return answers, record


def format_failure_rate(records: Sequence[RunRecord]) -> float:
    if not records:
        raise ValueError("no run records")
    first_failures = sum(1 for r in records if not r.attempts or not r.attempts[0].format_valid)
    return first_failures / len(records)

