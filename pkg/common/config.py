"""Centralized pipeline configuration using Pydantic settings."""
from functools import lru_cache
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Environment-driven configuration shared across pipeline stages."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    llm_endpoint_url: Optional[str] = Field(
        default=None,
        description="Base URL of an OpenAI-compatible chat-completions service (e.g. https://api.openai.com/v1).",
    )
    llm_api_key: Optional[str] = Field(default=None, description="Bearer credential for the chat endpoint")
    llm_model_name: str = Field(default="gpt-4", description="Chat model identifier sent on the wire")
    temperature: float = Field(default=0.0, ge=0.0, le=2.0)
    max_output_tokens: int = Field(default=256, gt=0)
    price_per_1k_input_tokens: float = Field(default=0.003, ge=0.0, description="USD per 1K prompt tokens")
    request_timeout: float = Field(default=60.0, gt=0, description="HTTP timeout (s) for outbound calls")

    max_in_flight: int = Field(default=4, gt=0, description="Concurrent chat requests")
    llm_rate_limit: str = Field(default="60/minute", description="Outbound rate rule shared by all workers")
    retry_attempts: int = Field(default=4, ge=1, description="Attempts per request before surfacing an error")
    retry_backoff_base: float = Field(default=0.5, ge=0.0, description="First backoff delay (s), doubled per retry")
    circuit_failure_threshold: int = Field(default=5, gt=0)
    circuit_recovery_timeout: int = Field(default=60, gt=0)

    replay_fixture_path: Optional[str] = Field(default=None, description="Hash-keyed replay fixture (JSON)")

    embedder: str = Field(default="bundled", description="'bundled' hashing embedder or 'remote' endpoint")
    embedding_endpoint_url: Optional[str] = Field(default=None)
    embedding_model_name: str = Field(default="all-MiniLM-L6-v2")
    embedding_cache_url: str = Field(
        default="sqlite:///./embedding_cache.db",
        description="SQLAlchemy URL of the on-disk embedding cache.",
    )
    embedding_cache_ttl: int = Field(default=3600, description="TTL (s) of the in-memory embedding layer")

    path_cap: int = Field(default=100_000, gt=0, description="Hard cap on enumerated simple paths")
    token_estimator: str = Field(default="heuristic", description="'heuristic' (chars/4) or 'tiktoken'")
    log_dir: str = Field(default="logs", description="Directory for per-stage log files")


_overrides: dict[str, object] = {}


@lru_cache
def get_settings() -> Settings:
    """Return a cached instance of the Settings object."""

    return Settings(**_overrides)


def apply_overrides(values: dict[str, object]) -> Settings:
    """Replace the config-file overrides layered above the environment and rebuild Settings."""

    _overrides.clear()
    _overrides.update(values)
    reset_settings_cache()
    return get_settings()


def reset_settings_cache() -> None:
    """Clear the cached Settings instance (useful for tests)."""

    get_settings.cache_clear()


class StageOptions(BaseModel):
    """Pipeline choices shared by the single-stage commands and a full run."""

    model_config = ConfigDict(extra="ignore")

    metric: str = Field(default="jaccard", pattern="^(jaccard|cosine)$")
    k: int = Field(default=10, ge=1, strict=True)
    technique: str = Field(default="pathocl", pattern="^(pathocl|uml-augmentation)$")
    embedder: str = Field(default="bundled", pattern="^(bundled|remote)$")
    max_len: Optional[int] = Field(default=None, ge=1, strict=True)


class RunConfig(StageOptions):
    """One evaluation run: inputs, pipeline choices and where artifacts go.

    Cross-field rules are checked here so a bad combination fails before any stage runs.
    """

    model_config = ConfigDict(extra="forbid")

    model_files: list[str] = Field(..., min_length=1)
    specs_files: list[str] = Field(..., min_length=1)
    backend: str = Field(default="replay", pattern="^(live|replay)$")
    output_dir: str = "run"
    replay_fixture: Optional[str] = None
    replay_seed: Optional[str] = None
    record_to: Optional[str] = None
    verdicts: Optional[str] = None
    baseline_run: Optional[str] = None
    strict_verdicts: bool = False

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if len(self.model_files) != len(self.specs_files):
            raise ValueError(
                f"{len(self.model_files)} --model file(s) but {len(self.specs_files)} --specs file(s); pass them in pairs"
            )
        if self.backend == "replay":
            if not (self.replay_fixture or self.replay_seed or get_settings().replay_fixture_path):
                raise ValueError("the replay backend needs --replay-fixture, --replay-seed or REPLAY_FIXTURE_PATH")
            if self.record_to:
                raise ValueError("--record-to only applies to the live backend")
        else:
            settings = get_settings()
            if not settings.llm_endpoint_url or not settings.llm_api_key:
                raise ValueError("the live backend needs LLM_ENDPOINT_URL and LLM_API_KEY in the environment")
        if self.embedder == "remote" and not get_settings().embedding_endpoint_url:
            raise ValueError("the remote embedder needs EMBEDDING_ENDPOINT_URL in the environment")
        return self
