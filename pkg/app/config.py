"""
Application configuration using Pydantic Settings.
All environment variables are validated on startup.
"""
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Harness settings loaded from environment variables."""

    # Application
    ENVIRONMENT: Literal["development", "production"] = Field(
        "development", description="Environment (development/production)"
    )
    LOG_LEVEL: str = Field("INFO", description="Logging level")

    # Sandbox limits
    TICK_DEADLINE_MS: int = Field(100, description="Per-tick reply deadline in milliseconds")
    HANDSHAKE_TIMEOUT_S: float = Field(5.0, description="Deadline for the ready line")
    COMPILE_TIMEOUT_S: float = Field(30.0, description="Deadline for the compile gate")
    TERMINATE_GRACE_S: float = Field(2.0, description="Grace period before a forced kill")
    STDERR_TAIL_BYTES: int = Field(8192, description="Bytes of candidate stderr retained")
    DIAGNOSTICS_LIMIT_BYTES: int = Field(65536, description="Compile diagnostics truncation")
    MAX_LINE_BYTES: int = Field(65536, description="Longest reply line accepted")

    # Parallelism
    SANDBOX_WORKERS: int = Field(4, description="Candidates evaluated concurrently")
    GENERATION_CONCURRENCY: int = Field(2, description="Concurrent provider requests")

    # Artifacts
    RUNS_DIR: str = Field("runs", description="Root directory for run artifacts")
    KEEP_ARTIFACTS: bool = Field(False, description="Keep candidate workdirs after episodes")

    # Pipeline switches
    CAEM_ALLOW_BRAKE: bool = Field(
        False, description="Permit the brake channel for the evasive-manoeuvre function"
    )
    EXTRACTION_HEURISTIC: bool = Field(
        True, description="Accept unfenced responses that are mostly code-like"
    )

    @field_validator("TICK_DEADLINE_MS", "SANDBOX_WORKERS", "GENERATION_CONCURRENCY")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        """Limits and worker counts must be at least one."""
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("HANDSHAKE_TIMEOUT_S", "COMPILE_TIMEOUT_S", "TERMINATE_GRACE_S")
    @classmethod
    def validate_timeout(cls, v: float) -> float:
        """Timeouts must be positive."""
        if v <= 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalise the level name."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


# Global settings instance
settings = Settings()
