"""
Generation client: prompt rendering, completion providers and code extraction.

Two providers are supported: an OpenAI-compatible chat endpoint and a replay
directory of canned responses (``<root>/<model>/<function>/attempt_###.txt``)
that makes whole runs reproducible offline.
"""
import asyncio
import hashlib
import os
import re
import textwrap
from pathlib import Path
from typing import List, Optional, Sequence, Union

import httpx
import openai
import structlog
from openai import AsyncOpenAI
from tenacity import (
    AsyncRetrying,
    RetryCallState,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from app.config import settings
from app.core.errors import ConfigurationError, ReplayMissingError, ValidationError
from app.models.candidate import (
    CandidateCode,
    CandidateMeta,
    ExtractionFailure,
    ProviderConfig,
    ProviderKind,
    RawResponse,
    RenderedPrompt,
)
from app.models.scenario import FunctionId

logger = structlog.get_logger()

TEMPLATE_PATH = Path(__file__).resolve().parent.parent / "resources" / "prompt_template.md"
PROMPT_MARKER = "{{FUNCTION_DESCRIPTION}}"
MARKER_REGION = 0.25  # marker must sit in the last quarter of the template
CODE_LINE_RATIO = 0.5

TRANSIENT_ERRORS = (
    openai.APIConnectionError,
    openai.APITimeoutError,
    openai.RateLimitError,
    openai.InternalServerError,
)

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.DOTALL)
_CODE_LINE_RE = re.compile(
    r"^\s*(?:"
    r"(?:import|from|def|class|return|if|elif|while|for|with|try|raise|yield|assert|pass"
    r"|break|continue|global|nonlocal|async|await|lambda)\b"
    r"|(?:else|except|finally)\b.*:"
    r"|#"
    r"|@\w"
    r"|[\w\.\[\]'\"]+\s*(?:[-+*/%|&]?=)(?!=)"
    r"|[\w\.]+\(.*\)\s*$"
    r"|[)\]}]+[,:]?\s*$"
    r")"
)


def load_template(path: Optional[Path] = None) -> str:
    """Read a prompt template (the shipped one by default)."""
    path = path or TEMPLATE_PATH
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read prompt template {path}: {e}") from e


def render_prompt(template: str, function_description: str) -> RenderedPrompt:
    """
    Insert a function description at the template's marker.

    Args:
        template: Prompt template carrying exactly one marker near its end
        function_description: Natural-language function description

    Returns:
        RenderedPrompt: Prompt text and its SHA-256

    Raises:
        ValidationError: If the marker is missing, duplicated or not near the end
    """
    count = template.count(PROMPT_MARKER)
    if count == 0:
        raise ValidationError(f"prompt template has no {PROMPT_MARKER} marker")
    if count > 1:
        raise ValidationError(f"prompt template has {count} {PROMPT_MARKER} markers")
    position = template.index(PROMPT_MARKER)
    if position < (1 - MARKER_REGION) * len(template.rstrip()) - len(PROMPT_MARKER):
        raise ValidationError(f"{PROMPT_MARKER} must be at the end of the template")

    text = template.replace(PROMPT_MARKER, function_description.strip())
    return RenderedPrompt(text=text, sha256=hashlib.sha256(text.encode("utf-8")).hexdigest())


def response_hash(text: Optional[str]) -> str:
    return hashlib.sha256((text or "").encode("utf-8")).hexdigest()


def build_meta(
    model: str,
    function_id: FunctionId,
    response: RawResponse,
    prompt: Optional[RenderedPrompt] = None,
) -> CandidateMeta:
    """Provenance record for the candidate extracted from one response."""
    return CandidateMeta(
        model=model,
        function_id=function_id,
        attempt=response.attempt,
        prompt_hash=prompt.sha256 if prompt else "",
        response_hash=response_hash(response.text),
    )


def _looks_like_code(text: str) -> bool:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return False
    code_like = sum(1 for line in lines if _CODE_LINE_RE.match(line))
    return code_like / len(lines) >= CODE_LINE_RATIO


def extract_code(
    response: str, meta: CandidateMeta, heuristic: Optional[bool] = None
) -> Union[CandidateCode, ExtractionFailure]:
    """
    Pull candidate source out of a model response.

    The largest fenced block wins. Without fences, the whole response is
    accepted when at least half of its non-empty lines look like code.

    Args:
        response: Raw response text
        meta: Candidate provenance
        heuristic: Override for EXTRACTION_HEURISTIC

    Returns:
        CandidateCode or ExtractionFailure("no code emitted")
    """
    heuristic = settings.EXTRACTION_HEURISTIC if heuristic is None else heuristic
    blocks = [
        textwrap.dedent(block).strip("\n").rstrip()
        for block in _FENCE_RE.findall(response)
    ]
    blocks = [block for block in blocks if block.strip()]
    if blocks:
        largest = max(blocks, key=len)
        if len(blocks) > 1:
            logger.info(
                "extraction_largest_block",
                model=meta.model,
                function=meta.function_id.value,
                attempt=meta.attempt,
                blocks=len(blocks),
                chosen=blocks.index(largest) + 1,
            )
        return CandidateCode(source=largest + "\n", meta=meta)

    if heuristic and _looks_like_code(response):
        logger.info("extraction_unfenced", model=meta.model, attempt=meta.attempt)
        return CandidateCode(source=response.strip("\n") + "\n", meta=meta)

    return ExtractionFailure(reason="no code emitted", meta=meta)


def _log_retry(state: RetryCallState) -> None:
    error = state.outcome.exception() if state.outcome else None
    logger.warning(
        "provider_request_retry",
        attempt=state.attempt_number,
        error=str(error),
        sleep_s=state.next_action.sleep if state.next_action else None,
    )


class GenerationClient:
    """Requests completions from a configured provider."""

    def _replay(
        self, cfg: ProviderConfig, attempts: Sequence[int], function_id: FunctionId
    ) -> List[RawResponse]:
        assert cfg.replay_root is not None
        directory = Path(cfg.replay_root) / cfg.model / function_id.value
        paths = {index: directory / f"attempt_{index:03d}.txt" for index in attempts}
        missing = [index for index, path in paths.items() if not path.is_file()]
        if missing:
            raise ReplayMissingError(str(directory), missing)
        responses = [
            RawResponse(attempt=index, text=path.read_text(encoding="utf-8"))
            for index, path in paths.items()
        ]
        logger.info(
            "replay_loaded", model=cfg.model, function=function_id.value, responses=len(responses)
        )
        return responses

    def _client(self, cfg: ProviderConfig, api_key: str) -> AsyncOpenAI:
        return AsyncOpenAI(
            api_key=api_key,
            base_url=cfg.endpoint,
            max_retries=0,
            http_client=httpx.AsyncClient(timeout=cfg.request_timeout_s),
        )

    async def _complete(
        self,
        client: AsyncOpenAI,
        cfg: ProviderConfig,
        prompt: str,
        attempt: int,
        semaphore: asyncio.Semaphore,
    ) -> RawResponse:
        async with semaphore:
            try:
                async for retry in AsyncRetrying(
                    stop=stop_after_attempt(cfg.retry.max_attempts),
                    wait=wait_exponential(
                        multiplier=cfg.retry.backoff_s, max=cfg.retry.max_backoff_s
                    ),
                    retry=retry_if_exception_type(TRANSIENT_ERRORS),
                    before_sleep=_log_retry,
                    reraise=True,
                ):
                    with retry:
                        completion = await client.chat.completions.create(
                            model=cfg.model,
                            messages=[{"role": "user", "content": prompt}],
                            temperature=cfg.temperature,
                            max_tokens=cfg.max_tokens,
                        )
            except openai.OpenAIError as e:
                logger.warning(
                    "provider_request_failed", model=cfg.model, attempt=attempt, error=str(e)
                )
                return RawResponse(attempt=attempt, error=str(e) or type(e).__name__)

        text = completion.choices[0].message.content if completion.choices else None
        logger.info("provider_request_success", model=cfg.model, attempt=attempt)
        return RawResponse(attempt=attempt, text=text or "")

    async def request_completions(
        self,
        cfg: ProviderConfig,
        prompt: RenderedPrompt,
        n: int,
        function_id: FunctionId,
        attempts: Optional[Sequence[int]] = None,
    ) -> List[RawResponse]:
        """
        Collect responses for attempts 1..n, ordered by attempt index.

        A resumed cell passes ``attempts`` so only the missing indices are requested.

        Args:
            cfg: Provider configuration
            prompt: Rendered prompt
            n: Number of attempts
            function_id: Function the prompt describes (replay subdirectory)
            attempts: Subset of 1..n to request (all of them by default)

        Returns:
            list: One RawResponse per attempt; failed attempts carry an error

        Raises:
            ValidationError: If n < 1 or an attempt index lies outside 1..n
            ConfigurationError: If the credential variable is not set
            ReplayMissingError: If the replay directory lacks attempt files
        """
        if n < 1:
            raise ValidationError("n must be >= 1")
        wanted = sorted(set(attempts)) if attempts is not None else list(range(1, n + 1))
        if any(index < 1 or index > n for index in wanted):
            raise ValidationError(f"attempt indices must lie in 1..{n}")
        if not wanted:
            return []
        if cfg.kind == ProviderKind.REPLAY_DIR:
            return self._replay(cfg, wanted, function_id)

        assert cfg.credential_env is not None
        api_key = os.environ.get(cfg.credential_env)
        if not api_key:
            raise ConfigurationError(f"credential variable {cfg.credential_env} is not set")

        semaphore = asyncio.Semaphore(settings.GENERATION_CONCURRENCY)
        logger.info(
            "provider_requests", model=cfg.model, function=function_id.value, n=len(wanted)
        )
        async with self._client(cfg, api_key) as client:
            responses = await asyncio.gather(
                *(
                    self._complete(client, cfg, prompt.text, attempt, semaphore)
                    for attempt in wanted
                )
            )
        return sorted(responses, key=lambda response: response.attempt)


# Global instance
generation_client = GenerationClient()
