"""
Pydantic models for providers, generated candidates and sandbox stages.
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.scenario import FunctionId


class ProviderKind(str, Enum):
    """Completion provider kinds."""

    HTTP_CHAT = "http_chat"
    REPLAY_DIR = "replay_dir"


class RetryPolicy(BaseModel):
    """Transport retry policy for one completion request."""

    max_attempts: int = Field(3, ge=1, le=10)
    backoff_s: float = Field(1.0, ge=0.0, description="Exponential backoff multiplier")
    max_backoff_s: float = Field(16.0, ge=0.0)


class ProviderConfig(BaseModel):
    """Where completions come from."""

    kind: ProviderKind
    model: str = Field(..., min_length=1, description="Model name, also the replay subdirectory")
    endpoint: Optional[str] = Field(None, description="OpenAI-compatible base URL")
    temperature: float = Field(0.7, ge=0.0, le=2.0)
    max_tokens: int = Field(2048, ge=1)
    credential_env: Optional[str] = Field(
        None, description="Environment variable holding the API key"
    )
    request_timeout_s: float = Field(120.0, gt=0.0)
    retry: RetryPolicy = Field(default_factory=RetryPolicy)
    replay_root: Optional[str] = Field(None, description="Root of replays/<model>/<function>/")

    @model_validator(mode="after")
    def validate_kind_fields(self) -> "ProviderConfig":
        """http_chat needs an endpoint and a credential variable, replay_dir a root."""
        if self.kind == ProviderKind.HTTP_CHAT:
            if not self.endpoint:
                raise ValueError("http_chat providers need an endpoint")
            if not self.credential_env:
                raise ValueError("http_chat providers need credential_env")
        elif not self.replay_root:
            raise ValueError("replay_dir providers need replay_root")
        return self

    class Config:
        json_schema_extra = {
            "example": {
                "kind": "http_chat",
                "model": "llama3:8b",
                "endpoint": "http://localhost:11434/v1",
                "credential_env": "OLLAMA_API_KEY",
                "temperature": 0.7,
            }
        }


class RawResponse(BaseModel):
    """One completion attempt. ``text`` is None when the attempt failed."""

    attempt: int = Field(..., ge=1)
    text: Optional[str] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.text is None


class CandidateMeta(BaseModel):
    """Provenance of one candidate."""

    model_config = ConfigDict(frozen=True)

    model: str
    function_id: FunctionId
    attempt: int = Field(..., ge=1)
    prompt_hash: str = ""
    response_hash: str = ""


class CandidateCode(BaseModel):
    """Extracted candidate source."""

    model_config = ConfigDict(frozen=True)

    source: str = Field(..., min_length=1)
    meta: CandidateMeta


class ExtractionFailure(BaseModel):
    """No usable code in a response."""

    model_config = ConfigDict(frozen=True)

    reason: str
    meta: CandidateMeta


class CandidateAdapter(BaseModel):
    """How to compile and run candidates of one language.

    Command templates may use ``{python}``, ``{source}`` and ``{workdir}``.
    """

    language: str = "python"
    source_name: str = Field("candidate.py", min_length=1)
    compile_cmd: Optional[List[str]] = None
    run_cmd: List[str] = Field(..., min_length=1)
    env_allowlist: List[str] = Field(default_factory=lambda: ["PATH", "LANG", "LC_ALL"])


class StageKind(str, Enum):
    """Sandbox stage outcomes."""

    COMPILED = "compiled"
    COMPILE_FAILED = "compile_failed"
    SPAWNED = "spawned"
    SPAWN_FAILED = "spawn_failed"


class StageResult(BaseModel):
    """Result of a sandbox gate."""

    stage: StageKind
    diagnostics: str = ""
    workdir: Optional[str] = None
    source_path: Optional[str] = None

    @model_validator(mode="after")
    def validate_diagnostics(self) -> "StageResult":
        """Failures always explain themselves."""
        if self.failed and not self.diagnostics:
            raise ValueError("failed stages need diagnostics")
        return self

    @property
    def failed(self) -> bool:
        return self.stage in (StageKind.COMPILE_FAILED, StageKind.SPAWN_FAILED)


class RenderedPrompt(BaseModel):
    """A prompt with its content hash."""

    model_config = ConfigDict(frozen=True)

    text: str
    sha256: str
