"""
Tests for the sandbox runner against misbehaving candidate processes.
"""
import asyncio
import time
from pathlib import Path

import psutil
import pytest

from app.config import settings
from app.core.errors import (
    CandidateCrashError,
    CandidateSpawnError,
    CandidateTimeoutError,
    ProtocolError,
)
from app.core.functions import channel_mask
from app.models.candidate import StageKind
from app.models.scenario import FunctionId, TestCaseId
from app.models.sim import TerminalKind
from app.services.closed_loop import run_closed_loop
from app.services.protocol import decode_control, encode_observation
from app.services.sandbox import sandbox_env, sandbox_runner
from app.services.scenario_engine import initial_world, instantiate_tc
from tests.conftest import controller_source


def first_observation() -> bytes:
    return encode_observation(initial_world(instantiate_tc(TestCaseId.S1)), "ego")


@pytest.fixture
async def spawn(python_adapter):
    """Compile and start fixture controllers; everything is torn down afterwards."""
    started = []

    async def start(name: str):
        compiled = await sandbox_runner.compile_candidate(controller_source(name), python_adapter)
        assert compiled.stage == StageKind.COMPILED
        handle = await sandbox_runner.spawn_candidate(python_adapter, compiled, False)
        started.append((compiled, handle))
        return handle

    yield start
    for compiled, handle in started:
        await sandbox_runner.terminate(handle)
        sandbox_runner.cleanup(compiled, False)


class TestCompileGate:
    """Test the adapter's compile step."""

    async def test_syntax_error_fails_compile(self, python_adapter):
        """Test that a syntax error is caught with diagnostics."""
        compiled = await sandbox_runner.compile_candidate(
            controller_source("syntax_error.py"), python_adapter
        )
        assert compiled.stage == StageKind.COMPILE_FAILED
        assert "SyntaxError" in compiled.diagnostics
        sandbox_runner.cleanup(compiled, False)
        assert not Path(compiled.workdir).exists()

    async def test_empty_source_fails_compile(self, python_adapter):
        """Test that blank source never reaches the compiler."""
        compiled = await sandbox_runner.compile_candidate("   \n", python_adapter)
        assert compiled.stage == StageKind.COMPILE_FAILED
        assert compiled.diagnostics == "empty source"
        sandbox_runner.cleanup(compiled, False)

    async def test_keep_artifacts(self, python_adapter):
        """Test that kept workdirs survive cleanup."""
        compiled = await sandbox_runner.compile_candidate(
            controller_source("golden_f1.py"), python_adapter
        )
        sandbox_runner.cleanup(compiled, True)
        assert Path(compiled.source_path).is_file()
        sandbox_runner.cleanup(compiled, False)


class TestEnvironment:
    """Test the scrubbed candidate environment."""

    def test_credentials_are_dropped(self, python_adapter, monkeypatch, tmp_path):
        """Test that credential-like variables never reach a candidate."""
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        monkeypatch.setenv("LANG", "C.UTF-8")
        adapter = python_adapter.model_copy(
            update={"env_allowlist": ["PATH", "LANG", "OPENAI_API_KEY"]}
        )
        env = sandbox_env(adapter, tmp_path)
        assert "OPENAI_API_KEY" not in env
        assert env["LANG"] == "C.UTF-8"
        assert env["HOME"] == str(tmp_path)
        assert env["PYTHONUNBUFFERED"] == "1"


class TestCandidateProcess:
    """Test the line exchange with real candidate processes."""

    async def test_well_behaved_candidate(self, spawn):
        """Test a full handshake and one exchange."""
        handle = await spawn("golden_f1.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        reply = await handle.exchange(first_observation())
        assert decode_control(reply).touched == frozenset()

    async def test_crash_reports_status_and_stderr(self, spawn):
        """Test that an exiting candidate surfaces its status and stderr tail."""
        handle = await spawn("fuzz_crash.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        with pytest.raises(CandidateCrashError) as exc_info:
            await handle.exchange(first_observation())
        assert exc_info.value.returncode == 3
        assert "fatal: giving up" in exc_info.value.stderr_tail

    async def test_hang_times_out(self, spawn):
        """Test that a silent candidate misses the tick deadline."""
        handle = await spawn("fuzz_hang.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        with pytest.raises(CandidateTimeoutError):
            await handle.exchange(first_observation())

    async def test_garbage_is_a_protocol_error(self, spawn):
        """Test that undecodable bytes are rejected by the decoder."""
        handle = await spawn("fuzz_garbage.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        reply = await handle.exchange(first_observation())
        with pytest.raises(ProtocolError):
            decode_control(reply)

    async def test_unsolicited_output(self, spawn):
        """Test that a second reply line is detected before the next observation."""
        handle = await spawn("fuzz_spam.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        await handle.exchange(first_observation())
        await asyncio.sleep(0.3)
        with pytest.raises(ProtocolError) as exc_info:
            await handle.exchange(first_observation())
        assert "unsolicited" in exc_info.value.detail

    async def test_terminate_reaps_descendants(self, spawn):
        """Test that a candidate ignoring SIGTERM is killed with all its children."""
        handle = await spawn("fuzz_fork.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        children = []
        for _ in range(50):
            children = psutil.Process(handle.pid).children(recursive=True)
            if len(children) >= 8:
                break
            await asyncio.sleep(0.1)
        assert len(children) >= 8

        await sandbox_runner.terminate(handle)

        assert handle.returncode is not None
        for child in children:
            try:
                child.wait(timeout=5)
            except (psutil.NoSuchProcess, psutil.TimeoutExpired):
                pass
            assert not child.is_running() or child.status() == psutil.STATUS_ZOMBIE
        assert not handle.workdir.exists()

    async def test_terminate_is_idempotent(self, spawn):
        """Test that a second terminate is a no-op."""
        handle = await spawn("golden_f1.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        first = await sandbox_runner.terminate(handle)
        assert await sandbox_runner.terminate(handle) == first

    async def test_oversized_number_is_a_protocol_error(self, spawn):
        """Test that an integer reply too large for a float is rejected by the decoder."""
        handle = await spawn("fuzz_huge_number.py")
        await handle.handshake(instantiate_tc(TestCaseId.S1).road)
        reply = await handle.exchange(first_observation())
        with pytest.raises(ProtocolError) as exc_info:
            decode_control(reply)
        assert exc_info.value.detail == "target_speed must be finite"


class TestSpawnFailure:
    """Test candidates whose run command cannot be executed."""

    async def test_missing_run_binary(self, python_adapter):
        """Test that a missing run binary raises a candidate-level spawn error."""
        adapter = python_adapter.model_copy(
            update={"run_cmd": ["/nonexistent/silgate-runner", "{source}"]}
        )
        compiled = await sandbox_runner.compile_candidate(
            controller_source("golden_f1.py"), adapter
        )
        assert compiled.stage == StageKind.COMPILED
        try:
            with pytest.raises(CandidateSpawnError) as exc_info:
                await sandbox_runner.spawn_candidate(adapter, compiled, False)
            assert "/nonexistent/silgate-runner" in exc_info.value.message
            assert exc_info.value.exit_code == 1
        finally:
            sandbox_runner.cleanup(compiled, False)


class TestWallBudget:
    """Test that misbehaving candidates end a full episode within the wall budget."""

    @pytest.mark.parametrize(
        ("fixture", "kind"),
        [
            ("fuzz_crash.py", TerminalKind.RUNTIME_ERROR),
            ("fuzz_hang.py", TerminalKind.PROTOCOL_TIMEOUT),
            ("fuzz_garbage.py", TerminalKind.PROTOCOL_ERROR),
            ("fuzz_spam.py", TerminalKind.PROTOCOL_ERROR),
            ("fuzz_huge_number.py", TerminalKind.PROTOCOL_ERROR),
        ],
    )
    async def test_episode_ends_within_budget(self, spawn, fixture, kind):
        """Test the terminal kind and the elapsed time of a whole TC6 episode."""
        scenario = instantiate_tc(TestCaseId.TC6)
        budget = scenario.horizon / 0.05 * settings.TICK_DEADLINE_MS / 1000 + 5.0
        handle = await spawn(fixture)
        started = time.monotonic()
        await handle.handshake(scenario.road)
        trace = await run_closed_loop(scenario, handle, channel_mask(FunctionId.F3))
        elapsed = time.monotonic() - started
        assert trace.terminal.kind == kind
        assert elapsed < budget
