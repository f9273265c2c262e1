"""
Evaluation orchestrator: one candidate through the whole pipeline, and the
model x function matrix with its journal.
"""
import asyncio
import json
import time
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import structlog

from app.config import settings
from app.core.errors import (
    CandidateCrashError,
    CandidateSpawnError,
    CandidateTimeoutError,
    ConfigurationError,
    InfrastructureError,
    ProtocolError,
)
from app.core.functions import cases_for, channel_mask, get_function
from app.core.logging_config import log_context
from app.models.candidate import (
    CandidateAdapter,
    CandidateCode,
    CandidateMeta,
    ExtractionFailure,
    ProviderConfig,
    RawResponse,
    RenderedPrompt,
    StageKind,
    StageResult,
)
from app.models.evaluation import EpisodeResult, EvaluationOutcome, MatrixReport, RunConfig, Stage
from app.models.protocol import ChannelMask
from app.models.scenario import FunctionId, Scenario, TestCaseId
from app.models.sim import Trace
from app.services.classifier import classify_failure
from app.services.closed_loop import handshake_failed_trace, run_closed_loop
from app.services.generation import (
    build_meta,
    extract_code,
    generation_client,
    load_template,
    render_prompt,
)
from app.services.journal import RunJournal, write_bundle, write_run_file
from app.services.oracle import evaluate_trace, verdict_stage
from app.services.reporting import (
    build_record,
    config_hash,
    pipeline_hash,
    write_report,
)
from app.services.sandbox import load_adapter, sandbox_runner
from app.services.scenario_engine import instantiate_tc
from app.services.traces import trace_hash

logger = structlog.get_logger()


@lru_cache(maxsize=None)
def shipped_scenario(tc_id: TestCaseId) -> Scenario:
    """Instantiated test case, built once per process."""
    return instantiate_tc(tc_id)


async def run_episode(
    scenario: Scenario,
    adapter: CandidateAdapter,
    compiled: StageResult,
    mask: ChannelMask,
    keep_artifacts: Optional[bool] = None,
) -> Trace:
    """
    Spawn a fresh candidate process and run one closed-loop episode.

    Raises:
        CandidateSpawnError: If the run command cannot be executed
        InfrastructureError: If the episode directory cannot be created
    """
    handle = await sandbox_runner.spawn_candidate(adapter, compiled, keep_artifacts)
    try:
        try:
            await handle.handshake(scenario.road)
        except ProtocolError as e:
            return handshake_failed_trace(scenario, e.detail, handle.stderr_tail)
        except (CandidateCrashError, CandidateTimeoutError) as e:
            return handshake_failed_trace(scenario, e.message, handle.stderr_tail)
        return await run_closed_loop(scenario, handle, mask)
    finally:
        await sandbox_runner.terminate(handle)


async def evaluate_candidate(
    candidate: CandidateCode,
    function_id: FunctionId,
    adapter: Optional[CandidateAdapter] = None,
    test_cases: Optional[Sequence[TestCaseId]] = None,
    keep_artifacts: Optional[bool] = None,
) -> EvaluationOutcome:
    """
    Compile a candidate, run it on every test case of its function and classify it.

    Episodes stop early only when compilation fails or the run command cannot
    be executed (spawn_failed); every test case is run even after the first
    failing one.

    Args:
        candidate: Extracted source with provenance
        function_id: Function under test
        adapter: Language adapter (the shipped Python adapter by default)
        test_cases: Override of the function's test cases
        keep_artifacts: Override for KEEP_ARTIFACTS

    Returns:
        EvaluationOutcome: Stage, verdicts, failure modes; traces attached

    Raises:
        ConfigurationError: On an unknown function or test case
        InfrastructureError: If the harness cannot compile or start candidates
    """
    get_function(function_id)
    adapter = adapter or load_adapter()
    cases = tuple(test_cases) if test_cases else cases_for(function_id)
    unknown = [tc.value for tc in cases if tc not in cases_for(function_id)]
    if unknown:
        raise ConfigurationError(f"{', '.join(unknown)} not test cases of {function_id.value}")
    mask = channel_mask(function_id)
    started = time.monotonic()

    compiled = await sandbox_runner.compile_candidate(candidate.source, adapter)
    gate = compiled
    episodes: List[EpisodeResult] = []
    traces: Dict[TestCaseId, Trace] = {}
    try:
        if not compiled.failed:
            for tc_id in cases:
                try:
                    trace = await run_episode(
                        shipped_scenario(tc_id), adapter, compiled, mask, keep_artifacts
                    )
                except CandidateSpawnError as e:
                    logger.warning("candidate_spawn_failed", tc=tc_id.value, error=e.message)
                    gate = StageResult(stage=StageKind.SPAWN_FAILED, diagnostics=e.message)
                    break
                verdict = evaluate_trace(trace, function_id, tc_id, mask)
                traces[tc_id] = trace
                episodes.append(
                    EpisodeResult(
                        tc_id=tc_id,
                        verdict=verdict,
                        terminal=trace.terminal,
                        ticks=len(trace.snapshots),
                        trace_hash=trace_hash(trace),
                    )
                )
    finally:
        sandbox_runner.cleanup(compiled, keep_artifacts)

    stage = verdict_stage(gate, episodes)
    outcome = EvaluationOutcome(
        meta=candidate.meta,
        stage=stage,
        compile=gate,
        episodes=episodes,
        source_length=len(candidate.source),
        traces=traces,
    )
    modes = classify_failure(outcome, candidate.source, traces)
    outcome = outcome.model_copy(
        update={"failure_modes": modes, "wall_time_s": time.monotonic() - started}
    )
    logger.info(
        "candidate_staged",
        model=candidate.meta.model,
        function=function_id.value,
        attempt=candidate.meta.attempt,
        stage=stage.value,
        tcs_passed=outcome.tcs_passed,
        primary_mode=outcome.primary_mode.value if outcome.primary_mode else None,
    )
    return outcome


def extraction_outcome(failure: ExtractionFailure) -> EvaluationOutcome:
    """Outcome of a response without code."""
    outcome = EvaluationOutcome(
        meta=failure.meta,
        stage=Stage.NON_COMPILABLE,
        extraction_failure=failure.reason,
    )
    return outcome.model_copy(update={"failure_modes": classify_failure(outcome, None)})


async def evaluate_response(
    response: str,
    meta: CandidateMeta,
    adapter: Optional[CandidateAdapter] = None,
    test_cases: Optional[Sequence[TestCaseId]] = None,
    keep_artifacts: Optional[bool] = None,
) -> Tuple[EvaluationOutcome, Optional[str]]:
    """
    Extract code from a raw response and evaluate it.

    Returns:
        tuple: (outcome, extracted source or None)
    """
    extracted = extract_code(response, meta)
    if isinstance(extracted, ExtractionFailure):
        logger.info(
            "extraction_failed", model=meta.model, attempt=meta.attempt, reason=extracted.reason
        )
        return extraction_outcome(extracted), None
    outcome = await evaluate_candidate(
        extracted, meta.function_id, adapter, test_cases, keep_artifacts
    )
    return outcome, extracted.source


class MatrixRunner:
    """Runs the (model, function) matrix of one run configuration."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.run_dir = Path(config.output_dir) / config.run_id
        self.template = load_template(Path(config.template_path) if config.template_path else None)
        self.adapter = config.adapter or load_adapter()
        self.semaphore = asyncio.Semaphore(config.parallelism or settings.SANDBOX_WORKERS)
        self.journal: Optional[RunJournal] = None

    async def _evaluate_attempt(
        self,
        response: RawResponse,
        provider: ProviderConfig,
        function_id: FunctionId,
        prompt: RenderedPrompt,
    ) -> EvaluationOutcome:
        assert self.journal is not None and response.text is not None
        meta = build_meta(provider.model, function_id, response, prompt)
        with log_context(attempt=meta.attempt):
            outcome, source = await self._evaluate_guarded(response.text, meta)
        write_bundle(self.run_dir, outcome, build_record(outcome), source, response.text)
        await self.journal.record_outcome(outcome)
        return outcome

    async def _evaluate_guarded(
        self, text: str, meta: CandidateMeta
    ) -> Tuple[EvaluationOutcome, Optional[str]]:
        async with self.semaphore:
            try:
                return await evaluate_response(
                    text,
                    meta,
                    self.adapter,
                    self.config.test_cases.get(meta.function_id),
                    self.config.keep_artifacts,
                )
            except InfrastructureError:
                raise
            except Exception as e:
                # recorded against the attempt; only infrastructure faults stop the cell
                logger.exception("evaluation_error", error=str(e))
                outcome = EvaluationOutcome(
                    meta=meta,
                    stage=Stage.NON_EXECUTABLE,
                    evaluation_error=f"{type(e).__name__}: {e}",
                )
                return outcome, None

    async def run_cell(self, provider: ProviderConfig, function_id: FunctionId) -> None:
        """Generate and evaluate one cell, requesting only attempts not yet journaled."""
        assert self.journal is not None
        model = provider.model
        prompt = render_prompt(self.template, get_function(function_id).description)
        done = self.journal.evaluated_attempts(model, function_id)
        missing = [index for index in range(1, self.config.repeats + 1) if index not in done]
        responses = await generation_client.request_completions(
            provider, prompt, self.config.repeats, function_id, attempts=missing
        )
        pending = [r for r in responses if not r.failed]
        failed = [r.attempt for r in responses if r.failed]
        logger.info(
            "cell_started",
            model=model,
            function=function_id.value,
            pending=len(pending),
            resumed=len(done),
            failed_attempts=len(failed),
        )

        note: Optional[str] = None
        results = await asyncio.gather(
            *(self._evaluate_attempt(r, provider, function_id, prompt) for r in pending),
            return_exceptions=True,
        )
        errors = [result for result in results if isinstance(result, BaseException)]
        for error in errors:
            if not isinstance(error, InfrastructureError):
                raise error
        if errors:
            message = errors[0].message if isinstance(errors[0], InfrastructureError) else ""
            logger.error("cell_aborted", model=model, function=function_id.value, error=message)
            note = f"infrastructure error: {message}"
        await self.journal.close_cell(model, function_id, self.config.repeats, failed, note)

    async def run(self) -> MatrixReport:
        """
        Run every incomplete cell, then write the report.

        Raises:
            ConfigurationError: Without providers, or on provider misconfiguration
        """
        if not self.config.providers:
            raise ConfigurationError("run configuration lists no providers")
        write_run_file(
            self.run_dir, self.config, config_hash(self.config), pipeline_hash(self.template)
        )
        self.journal = RunJournal(self.run_dir)
        with log_context(run_id=self.config.run_id):
            for provider in self.config.providers:
                for function_id in self.config.functions:
                    with log_context(model=provider.model, function=function_id.value):
                        if self.journal.cell_complete(provider.model, function_id):
                            logger.info("cell_skipped")
                            continue
                        await self.run_cell(provider, function_id)
            return write_report(self.run_dir)


async def run_matrix(config: RunConfig) -> MatrixReport:
    """
    Generate, evaluate and report every (model, function) cell of a run.

    Resumable: cells closed as complete in the run journal are skipped, and
    attempts already evaluated in an unfinished cell are not evaluated again.

    Args:
        config: Run configuration

    Returns:
        MatrixReport: Report body of the run directory
    """
    return await MatrixRunner(config).run()


async def generate_responses(config: RunConfig) -> Path:
    """
    Collect raw responses only, laid out so a replay provider can read them back.

    Writes ``<run>/responses/<model>/<function>/attempt_###.txt`` and an
    ``extraction.json`` per cell. Failed provider attempts get no response file
    and are listed with their error.

    Returns:
        Path: Root of the response tree (usable as a replay_root)
    """
    if not config.providers:
        raise ConfigurationError("run configuration lists no providers")
    template = load_template(Path(config.template_path) if config.template_path else None)
    root = Path(config.output_dir) / config.run_id / "responses"
    for provider in config.providers:
        for function_id in config.functions:
            prompt = render_prompt(template, get_function(function_id).description)
            responses = await generation_client.request_completions(
                provider, prompt, config.repeats, function_id
            )
            cell_dir = root / provider.model / function_id.value
            records = []
            try:
                cell_dir.mkdir(parents=True, exist_ok=True)
                for response in responses:
                    meta = build_meta(provider.model, function_id, response, prompt)
                    entry: Dict[str, Any] = {
                        "attempt": response.attempt,
                        "response_hash": meta.response_hash,
                    }
                    if response.text is None:
                        entry["error"] = response.error or "request failed"
                    else:
                        (cell_dir / f"attempt_{response.attempt:03d}.txt").write_text(
                            response.text, encoding="utf-8"
                        )
                        extracted = extract_code(response.text, meta)
                        entry["extracted"] = isinstance(extracted, CandidateCode)
                        if isinstance(extracted, ExtractionFailure):
                            entry["reason"] = extracted.reason
                    records.append(entry)
                (cell_dir / "extraction.json").write_text(
                    json.dumps(
                        {"prompt_hash": prompt.sha256, "attempts": records},
                        indent=2,
                        sort_keys=True,
                    )
                    + "\n",
                    encoding="utf-8",
                )
            except OSError as e:
                raise InfrastructureError(f"cannot write responses into {cell_dir}: {e}") from e
            logger.info(
                "responses_stored",
                model=provider.model,
                function=function_id.value,
                stored=sum(1 for r in responses if not r.failed),
                failed=sum(1 for r in responses if r.failed),
            )
    return root
