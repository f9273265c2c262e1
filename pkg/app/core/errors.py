"""
Custom exception classes and the CLI error mapper.

Candidate faults are recorded as values (trace terminals, stage results,
extraction failures). Exceptions here are for malformed inputs and for
infrastructure faults that must stop a command.
"""
from typing import List, Optional

import structlog

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_CANDIDATE_FAILURES = 1
EXIT_INFRASTRUCTURE = 2


class SilgateError(Exception):
    """Base exception for the harness."""

    def __init__(self, message: str, exit_code: int = EXIT_INFRASTRUCTURE):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


class ConfigurationError(SilgateError):
    """Raised when run, provider or adapter configuration is unusable."""


class InfrastructureError(SilgateError):
    """Raised when the harness itself cannot do its job (disk, spawn, interpreter)."""


class ValidationError(SilgateError):
    """Raised when an input value fails validation."""


class ScenarioError(SilgateError):
    """Raised when a scenario file cannot be parsed."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        location = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{location}{message}")


class UnknownAgentError(ScenarioError):
    """Raised when a scenario event references an agent that is not placed."""


class InfeasibleCutinError(SilgateError):
    """Raised when no cut-in gap reproduces the requested time-to-brake."""


class ProtocolError(SilgateError):
    """Raised when a candidate violates the tick protocol."""

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail, EXIT_CANDIDATE_FAILURES)


class CandidateTimeoutError(SilgateError):
    """Raised when a candidate misses a reply deadline."""

    def __init__(self, message: str = "candidate missed the reply deadline"):
        super().__init__(message, EXIT_CANDIDATE_FAILURES)


class CandidateCrashError(SilgateError):
    """Raised when a candidate process exits mid-episode."""

    def __init__(self, exit_code: Optional[int], stderr_tail: str):
        self.returncode = exit_code
        self.stderr_tail = stderr_tail
        super().__init__(f"candidate exited with status {exit_code}", EXIT_CANDIDATE_FAILURES)


class SpawnError(InfrastructureError):
    """Raised when the harness cannot start a process it needs (compiler, episode directory)."""


class CandidateSpawnError(SilgateError):
    """Raised when the adapter's run command cannot be executed for a candidate."""

    def __init__(self, message: str):
        super().__init__(message, EXIT_CANDIDATE_FAILURES)


class ReplayMissingError(ConfigurationError):
    """Raised when a replay directory lacks attempt files."""

    def __init__(self, directory: str, missing: List[int]):
        self.missing = missing
        listed = ", ".join(f"attempt_{index:03d}.txt" for index in missing)
        super().__init__(f"replay directory {directory} is missing {listed}")


class SchemaViolationError(SilgateError):
    """Raised when an emitted record does not match the shipped schema."""


class TraceParseError(SilgateError):
    """Raised when a serialized trace is corrupt."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"byte offset {offset}: {message}")


def handle_cli_error(error: Exception) -> int:
    """
    Map an exception escaping a command to a process exit code.

    Args:
        error: The exception raised by a command handler

    Returns:
        int: Exit code (2 for infrastructure and configuration faults)
    """
    if isinstance(error, SilgateError):
        logger.error("command_failed", error=error.message, kind=type(error).__name__)
        return error.exit_code
    logger.exception("command_crashed", error=str(error))
    return EXIT_INFRASTRUCTURE
