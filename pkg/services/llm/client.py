"""Chat-completion backends (live OpenAI-compatible endpoint, replay fixture) and generation."""
from __future__ import annotations

import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from threading import Lock
from typing import Optional, Protocol, Sequence

import httpx
from circuitbreaker import CircuitBreaker, CircuitBreakerError

from common.config import Settings
from common.errors import BackendError, DataError, UsageError
from common.logging_setup import get_stage_logger
from common.models import BackendKind
from common.rate_limit import OutboundLimiter
from common.schemas import Completion, GenerationConfig, PromptBundle
from services.prompt.builder import estimate_tokens

from .replay import ReplayEntry, ReplayStore

logger = get_stage_logger("llm")

_FENCE_RE = re.compile(r"^```[A-Za-z0-9_-]*[ \t]*\n?(.*?)\n?```$", re.DOTALL)
_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


def strip_fences(text: str) -> str:
    """Trim whitespace and one surrounding markdown code fence."""

    stripped = text.strip()
    match = _FENCE_RE.match(stripped)
    return match.group(1).strip() if match else stripped


def config_from_settings(settings: Settings) -> GenerationConfig:
    return GenerationConfig(
        model_name=settings.llm_model_name,
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens,
        price_per_1k_input_tokens=settings.price_per_1k_input_tokens,
    )


class Backend(Protocol):
    kind: BackendKind

    def complete(self, bundle: PromptBundle, cfg: GenerationConfig) -> ReplayEntry: ...


class ReplayBackend:
    kind = BackendKind.REPLAY

    def __init__(self, store: ReplayStore) -> None:
        self.store = store

    def complete(self, bundle: PromptBundle, cfg: GenerationConfig) -> ReplayEntry:
        return self.store.lookup(bundle)


class LiveBackend:
    """OpenAI-compatible ``/chat/completions`` over HTTPS.

    Transient failures are retried with exponential backoff; repeated failures
    open a circuit breaker so a dead endpoint fails fast.
    """

    kind = BackendKind.LIVE

    def __init__(
        self,
        settings: Settings,
        client: Optional[httpx.Client] = None,
        recorder: Optional[ReplayStore] = None,
        sleep=time.sleep,
    ) -> None:
        if not settings.llm_endpoint_url or not settings.llm_api_key:
            raise UsageError("the live backend needs LLM_ENDPOINT_URL and LLM_API_KEY")
        self.settings = settings
        self.recorder = recorder
        self._url = settings.llm_endpoint_url.rstrip("/") + "/chat/completions"
        self._client = client or httpx.Client(
            timeout=settings.request_timeout,
            headers={"Authorization": f"Bearer {settings.llm_api_key}"},
        )
        self._limiter = OutboundLimiter(settings.llm_rate_limit)
        self._breaker = CircuitBreaker(
            failure_threshold=settings.circuit_failure_threshold,
            recovery_timeout=settings.circuit_recovery_timeout,
            expected_exception=BackendError,
            name="chat-completions",
        )
        self._sleep = sleep

    def complete(self, bundle: PromptBundle, cfg: GenerationConfig) -> ReplayEntry:
        payload = {
            "model": cfg.model_name,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        try:
            body = self._breaker.call(self._post_with_retries, payload)
        except CircuitBreakerError as exc:
            raise BackendError(f"chat endpoint unavailable: {exc}") from exc

        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected chat response shape: {exc}") from exc
        usage = body.get("usage") or {}
        entry = ReplayEntry(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", bundle.approx_tokens)),
            output_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
        )
        if self.recorder is not None:
            self.recorder.record(bundle, entry)
        return entry

    def _post_with_retries(self, payload: dict) -> dict:
        attempts = self.settings.retry_attempts
        for attempt in range(1, attempts + 1):
            self._limiter.acquire()
            try:
                response = self._client.post(self._url, json=payload)
            except httpx.TransportError as exc:
                failure = f"transport error: {exc}"
            else:
                if response.status_code in (401, 403):
                    raise BackendError(f"chat endpoint rejected the credential (HTTP {response.status_code})")
                if response.status_code not in _RETRYABLE_STATUS:
                    if response.is_error:
                        raise BackendError(f"chat endpoint returned HTTP {response.status_code}: {response.text[:200]}")
                    return response.json()
                failure = f"HTTP {response.status_code}"
            if attempt == attempts:
                raise BackendError(f"chat request failed after {attempts} attempts ({failure})")
            delay = self.settings.retry_backoff_base * 2 ** (attempt - 1)
            logger.warning("chat request attempt %d/%d failed (%s); retrying in %.2fs", attempt, attempts, failure, delay)
            self._sleep(delay)
        raise BackendError("chat request failed")  # pragma: no cover - loop always returns or raises


class RunLog:
    """JSON-lines completion log; appends are serialized across worker threads."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def append(self, completion: Completion) -> None:
        line = json.dumps(completion.model_dump(mode="json"), ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


def load_run_log(path: str | Path) -> list[Completion]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read run log: {exc.strerror or exc}", location=str(path)) from exc
    completions: list[Completion] = []
    for number, line in enumerate(lines, start=1):
        if line.strip():
            try:
                completions.append(Completion.model_validate_json(line))
            except ValueError as exc:
                raise DataError(f"invalid completion record: {exc}", location=f"{path}:{number}") from exc
    return completions


def generate(
    bundle: PromptBundle,
    cfg: GenerationConfig,
    backend: Backend,
    spec_id: Optional[str] = None,
    rank: Optional[int] = None,
) -> Completion:
    entry = backend.complete(bundle, cfg)
    return Completion(
        text=strip_fences(entry.text),
        input_tokens=entry.input_tokens,
        output_tokens=entry.output_tokens,
        cost_usd=entry.input_tokens / 1000 * cfg.price_per_1k_input_tokens,
        backend=backend.kind,
        spec_id=spec_id,
        rank=rank,
        technique=bundle.technique,
        path=bundle.path,
    )


def generate_many(
    jobs: Sequence[tuple[PromptBundle, str, int]],
    cfg: GenerationConfig,
    backend: Backend,
    max_in_flight: int = 4,
    run_log: Optional[RunLog] = None,
) -> list[Completion]:
    """Fan out (bundle, spec_id, rank) jobs; results and log lines keep job order."""

    def run(job: tuple[PromptBundle, str, int]) -> Completion:
        bundle, spec_id, rank = job
        return generate(bundle, cfg, backend, spec_id=spec_id, rank=rank)

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        completions = list(pool.map(run, jobs))
    if run_log is not None:
        for completion in completions:
            run_log.append(completion)
    logger.info("generated %d completions via %s backend", len(completions), backend.kind.value)
    return completions
