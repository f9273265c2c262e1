"""
Sandbox runner: compile gate, candidate processes and teardown.

Each candidate gets a private temporary directory, a scrubbed environment and
its own process group. Candidate misbehaviour surfaces as StageResult values
or as CandidateTimeoutError / CandidateCrashError / ProtocolError from the
line exchange; only harness faults raise InfrastructureError.
"""
import asyncio
import os
import shutil
import signal
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Union

import psutil
import structlog

from app.config import settings
from app.core.errors import (
    CandidateCrashError,
    CandidateSpawnError,
    CandidateTimeoutError,
    ConfigurationError,
    InfrastructureError,
    ProtocolError,
    SpawnError,
)
from app.models.candidate import CandidateAdapter, StageKind, StageResult
from app.models.sim import RoadSpec
from app.services import protocol

logger = structlog.get_logger()

ADAPTER_DIR = Path(__file__).resolve().parent.parent / "resources" / "adapters"
SENSITIVE_ENV_MARKERS = ("KEY", "TOKEN", "SECRET", "PASSWORD", "CREDENTIAL")
_Line = Union[bytes, None, ProtocolError]


def load_adapter(path: Optional[Path] = None) -> CandidateAdapter:
    """
    Load a candidate adapter description.

    Args:
        path: Adapter JSON file (the shipped python adapter by default)

    Raises:
        ConfigurationError: If the file is missing or invalid
    """
    path = path or ADAPTER_DIR / "python.json"
    try:
        return CandidateAdapter.model_validate_json(path.read_bytes())
    except OSError as e:
        raise ConfigurationError(f"cannot read adapter {path}: {e}") from e
    except ValueError as e:
        raise ConfigurationError(f"invalid adapter {path}: {e}") from e


def _truncate(data: bytes, limit: int) -> str:
    text = data.decode("utf-8", errors="replace")
    if len(data) > limit:
        text = data[:limit].decode("utf-8", errors="replace") + "\n[diagnostics truncated]"
    return text


def _expand(template: List[str], source: Path, workdir: Path) -> List[str]:
    placeholders = {"{python}": sys.executable, "{source}": str(source), "{workdir}": str(workdir)}
    argv = []
    for part in template:
        for marker, value in placeholders.items():
            part = part.replace(marker, value)
        argv.append(part)
    return argv


def sandbox_env(adapter: CandidateAdapter, workdir: Path) -> Dict[str, str]:
    """Environment of a candidate: allowlisted variables minus anything credential-like."""
    env = {
        name: os.environ[name]
        for name in adapter.env_allowlist
        if name in os.environ and not any(m in name.upper() for m in SENSITIVE_ENV_MARKERS)
    }
    env.update(
        {
            "HOME": str(workdir),
            "TMPDIR": str(workdir),
            "PYTHONUNBUFFERED": "1",
            "PYTHONDONTWRITEBYTECODE": "1",
            "PYTHONIOENCODING": "utf-8",
        }
    )
    return env


def _signal_group(pid: int, sig: signal.Signals) -> None:
    try:
        os.killpg(pid, sig)
    except (ProcessLookupError, PermissionError):
        pass


class CandidateProcess:
    """
    A running candidate speaking the line protocol.

    Stdout is pumped into a queue so that replies can be awaited with a
    deadline; stderr is pumped into a bounded tail buffer.
    """

    def __init__(
        self,
        process: asyncio.subprocess.Process,
        workdir: Path,
        keep_artifacts: bool = False,
    ) -> None:
        self._process = process
        self.workdir = workdir
        self._keep = keep_artifacts
        self._lines: "asyncio.Queue[_Line]" = asyncio.Queue()
        self._stderr = bytearray()
        self._terminated = False
        self._tasks = [
            asyncio.create_task(self._pump_stdout()),
            asyncio.create_task(self._pump_stderr()),
        ]

    @property
    def pid(self) -> int:
        return self._process.pid

    @property
    def returncode(self) -> Optional[int]:
        return self._process.returncode

    @property
    def stderr_tail(self) -> str:
        return bytes(self._stderr).decode("utf-8", errors="replace")

    async def _pump_stdout(self) -> None:
        stream = self._process.stdout
        assert stream is not None
        try:
            while True:
                line = await stream.readline()
                if not line:
                    break
                await self._lines.put(line.rstrip(b"\r\n"))
        except ValueError:
            # StreamReader.readline reports an overrun of the line limit as ValueError
            await self._lines.put(ProtocolError("reply line exceeds the size limit"))
            return
        await self._lines.put(None)

    async def _pump_stderr(self) -> None:
        stream = self._process.stderr
        assert stream is not None
        limit = settings.STDERR_TAIL_BYTES
        while True:
            chunk = await stream.read(4096)
            if not chunk:
                break
            self._stderr.extend(chunk)
            if len(self._stderr) > limit:
                del self._stderr[:-limit]

    async def _exit_status(self) -> Optional[int]:
        try:
            await asyncio.wait_for(self._process.wait(), 1.0)
            await asyncio.wait_for(self._tasks[1], 1.0)
        except (asyncio.TimeoutError, asyncio.CancelledError):
            pass
        return self._process.returncode

    async def send_line(self, payload: bytes, timeout: Optional[float] = None) -> None:
        """Write one line to the candidate's stdin."""
        stdin = self._process.stdin
        if stdin is None or stdin.is_closing():
            raise CandidateCrashError(await self._exit_status(), self.stderr_tail)
        try:
            stdin.write(payload)
            await asyncio.wait_for(stdin.drain(), timeout)
        except asyncio.TimeoutError as e:
            raise CandidateTimeoutError("candidate stopped reading its input") from e
        except (BrokenPipeError, ConnectionResetError) as e:
            raise CandidateCrashError(await self._exit_status(), self.stderr_tail) from e

    async def receive_line(self, timeout: float) -> bytes:
        """
        Wait for one line from the candidate.

        Raises:
            CandidateTimeoutError: If nothing arrives within ``timeout`` seconds
            CandidateCrashError: If the candidate closed stdout
            ProtocolError: If the line is longer than MAX_LINE_BYTES
        """
        try:
            item = await asyncio.wait_for(self._lines.get(), timeout)
        except asyncio.TimeoutError as e:
            raise CandidateTimeoutError(f"no reply within {timeout * 1000:.0f} ms") from e
        if item is None:
            self._lines.put_nowait(None)
            raise CandidateCrashError(await self._exit_status(), self.stderr_tail)
        if isinstance(item, ProtocolError):
            raise item
        return item

    async def handshake(self, road: RoadSpec) -> None:
        await protocol.handshake(self, road)

    async def exchange(self, message: bytes) -> bytes:
        """Send an observation and wait for the reply within the tick deadline."""
        if not self._lines.empty():
            pending = self._lines.get_nowait()
            if pending is None:
                raise CandidateCrashError(await self._exit_status(), self.stderr_tail)
            raise ProtocolError("unsolicited output before observation")
        deadline = settings.TICK_DEADLINE_MS / 1000
        await self.send_line(message, deadline)
        return await self.receive_line(deadline)

    def _descendants(self) -> List[psutil.Process]:
        try:
            return psutil.Process(self._process.pid).children(recursive=True)
        except psutil.Error:
            return []

    async def terminate(self) -> Optional[int]:
        """
        Stop the candidate and everything it started.

        Closes stdin and waits for a clean exit, then SIGTERM to the process
        group, then SIGKILL. Safe to call more than once.

        Returns:
            Optional[int]: The candidate's exit status
        """
        if self._terminated:
            return self._process.returncode
        self._terminated = True
        process = self._process
        grace = settings.TERMINATE_GRACE_S
        descendants = self._descendants()
        forced = False

        if process.returncode is None:
            if process.stdin is not None and not process.stdin.is_closing():
                try:
                    process.stdin.close()
                except (BrokenPipeError, ConnectionResetError):
                    pass
            try:
                await asyncio.wait_for(process.wait(), grace)
            except asyncio.TimeoutError:
                _signal_group(process.pid, signal.SIGTERM)
                try:
                    await asyncio.wait_for(process.wait(), grace)
                except asyncio.TimeoutError:
                    forced = True
                    _signal_group(process.pid, signal.SIGKILL)
                    await process.wait()

        _signal_group(process.pid, signal.SIGKILL)
        for child in descendants:
            try:
                child.kill()
            except psutil.Error:
                pass

        for task in self._tasks:
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)

        if not self._keep:
            shutil.rmtree(self.workdir, ignore_errors=True)
        logger.debug(
            "candidate_terminated",
            pid=process.pid,
            returncode=process.returncode,
            forced=forced,
            children=len(descendants),
        )
        return process.returncode


class SandboxRunner:
    """Compiles and starts candidates."""

    async def compile_candidate(self, source: str, adapter: CandidateAdapter) -> StageResult:
        """
        Write the candidate to a fresh workdir and run the adapter's compile gate.

        Args:
            source: Candidate source text
            adapter: Language adapter

        Returns:
            StageResult: compiled, or compile_failed with diagnostics

        Raises:
            InfrastructureError: If the workdir cannot be created
            SpawnError: If the compiler itself cannot be started
        """
        try:
            workdir = Path(tempfile.mkdtemp(prefix="silgate-"))
            source_path = workdir / adapter.source_name
            source_path.write_text(source, encoding="utf-8")
        except OSError as e:
            raise InfrastructureError(f"cannot prepare candidate workdir: {e}") from e

        if not source.strip():
            return StageResult(
                stage=StageKind.COMPILE_FAILED,
                diagnostics="empty source",
                workdir=str(workdir),
                source_path=str(source_path),
            )
        if not adapter.compile_cmd:
            return StageResult(
                stage=StageKind.COMPILED, workdir=str(workdir), source_path=str(source_path)
            )

        argv = _expand(adapter.compile_cmd, source_path, workdir)
        try:
            process = await asyncio.create_subprocess_exec(
                *argv,
                cwd=workdir,
                env=sandbox_env(adapter, workdir),
                stdin=asyncio.subprocess.DEVNULL,
                stdout=asyncio.subprocess.PIPE,
                stderr=asyncio.subprocess.STDOUT,
                start_new_session=True,
            )
        except OSError as e:
            raise SpawnError(f"cannot start compiler {argv[0]}: {e}") from e

        try:
            output, _ = await asyncio.wait_for(process.communicate(), settings.COMPILE_TIMEOUT_S)
        except asyncio.TimeoutError:
            _signal_group(process.pid, signal.SIGKILL)
            await process.wait()
            logger.warning("compile_timeout", workdir=str(workdir))
            return StageResult(
                stage=StageKind.COMPILE_FAILED,
                diagnostics=f"compile timed out after {settings.COMPILE_TIMEOUT_S:g} s",
                workdir=str(workdir),
                source_path=str(source_path),
            )

        diagnostics = _truncate(output, settings.DIAGNOSTICS_LIMIT_BYTES)
        if process.returncode != 0:
            logger.info("compile_failed", returncode=process.returncode)
            return StageResult(
                stage=StageKind.COMPILE_FAILED,
                diagnostics=diagnostics or f"compiler exited with status {process.returncode}",
                workdir=str(workdir),
                source_path=str(source_path),
            )
        return StageResult(
            stage=StageKind.COMPILED,
            diagnostics=diagnostics,
            workdir=str(workdir),
            source_path=str(source_path),
        )

    async def spawn_candidate(
        self,
        adapter: CandidateAdapter,
        compiled: StageResult,
        keep_artifacts: Optional[bool] = None,
    ) -> CandidateProcess:
        """
        Start a compiled candidate in its own episode directory and process group.

        Raises:
            SpawnError: If the candidate was not compiled
            InfrastructureError: If the episode directory cannot be created
            CandidateSpawnError: If the run command cannot be executed (missing binary,
                no execute permission); recorded as spawn_failed
        """
        if compiled.stage != StageKind.COMPILED or not compiled.workdir or not compiled.source_path:
            raise SpawnError("candidate was not compiled")
        keep = settings.KEEP_ARTIFACTS if keep_artifacts is None else keep_artifacts
        try:
            episode_dir = Path(tempfile.mkdtemp(prefix="episode-", dir=compiled.workdir))
        except OSError as e:
            raise InfrastructureError(f"cannot prepare episode directory: {e}") from e

        argv = _expand(adapter.run_cmd, Path(compiled.source_path), episode_dir)
        try:
            process = await asyncio.create_subprocess_exec(
                *argv,
                cwd=episode_dir,
                env=sandbox_env(adapter, episode_dir),
                stdin=asyncio.subprocess.PIPE,
                stdout=asyncio.subprocess.PIPE,
                stderr=asyncio.subprocess.PIPE,
                start_new_session=True,
                limit=settings.MAX_LINE_BYTES,
            )
        except OSError as e:
            shutil.rmtree(episode_dir, ignore_errors=True)
            raise CandidateSpawnError(f"cannot start candidate {argv[0]}: {e}") from e

        logger.debug("candidate_spawned", pid=process.pid, workdir=str(episode_dir))
        return CandidateProcess(process, episode_dir, keep)

    async def tick_exchange(self, handle: CandidateProcess, message: bytes) -> bytes:
        return await handle.exchange(message)

    async def terminate(self, handle: CandidateProcess) -> Optional[int]:
        return await handle.terminate()

    def cleanup(self, compiled: StageResult, keep_artifacts: Optional[bool] = None) -> None:
        """Remove a compile workdir unless artifacts are kept."""
        keep = settings.KEEP_ARTIFACTS if keep_artifacts is None else keep_artifacts
        if compiled.workdir and not keep:
            shutil.rmtree(compiled.workdir, ignore_errors=True)


# Global instance
sandbox_runner = SandboxRunner()
