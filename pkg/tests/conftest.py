"""
Pytest fixtures and configuration.
"""
import os

# generous limits for loaded CI machines; set before app.config is imported
os.environ.setdefault("TICK_DEADLINE_MS", "500")
os.environ.setdefault("TERMINATE_GRACE_S", "0.5")
os.environ.setdefault("HANDSHAKE_TIMEOUT_S", "10")

from pathlib import Path  # noqa: E402
from typing import Callable  # noqa: E402

import pytest  # noqa: E402

from app.models.candidate import CandidateAdapter, CandidateCode, CandidateMeta  # noqa: E402
from app.models.scenario import FunctionId  # noqa: E402
from app.services.sandbox import load_adapter  # noqa: E402

FIXTURES_DIR = Path(__file__).resolve().parent / "fixtures"
CONTROLLERS_DIR = FIXTURES_DIR / "controllers"
REPLAYS_DIR = FIXTURES_DIR / "replays"


def controller_source(name: str) -> str:
    """Source text of a fixture controller."""
    return (CONTROLLERS_DIR / name).read_text(encoding="utf-8")


@pytest.fixture
def python_adapter() -> CandidateAdapter:
    """The shipped Python adapter."""
    return load_adapter()


@pytest.fixture
def candidate() -> Callable[..., CandidateCode]:
    """Factory building a candidate from a fixture controller."""

    def build(name: str, function_id: FunctionId, attempt: int = 1) -> CandidateCode:
        return CandidateCode(
            source=controller_source(name),
            meta=CandidateMeta(model="fixture", function_id=function_id, attempt=attempt),
        )

    return build


@pytest.fixture
def runs_dir(tmp_path: Path) -> Path:
    """Empty runs root."""
    path = tmp_path / "runs"
    path.mkdir()
    return path
