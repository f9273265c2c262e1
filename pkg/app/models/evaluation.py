"""
Pydantic models for verdicts, outcomes, run configuration and matrix reports.
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from app.models.candidate import CandidateAdapter, CandidateMeta, ProviderConfig, StageResult
from app.models.scenario import FunctionId, TestCaseId
from app.models.sim import Terminal, Trace


class CheckStatus(str, Enum):
    """Outcome of one oracle check."""

    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


class CheckResult(BaseModel):
    """One oracle check with its evidence."""

    model_config = ConfigDict(frozen=True)

    status: CheckStatus
    tick: Optional[int] = None
    detail: str = ""

    @classmethod
    def ok(cls, detail: str = "") -> "CheckResult":
        return cls(status=CheckStatus.PASS, detail=detail)

    @classmethod
    def fail(cls, detail: str, tick: Optional[int] = None) -> "CheckResult":
        return cls(status=CheckStatus.FAIL, tick=tick, detail=detail)

    @classmethod
    def skipped(cls, detail: str = "not applicable") -> "CheckResult":
        return cls(status=CheckStatus.SKIPPED, detail=detail)

    @property
    def failed(self) -> bool:
        return self.status == CheckStatus.FAIL


class Requirement(str, Enum):
    """Safety requirements."""

    R1 = "R1"  # integrable without manual modification
    R2 = "R2"  # touches only the function's own signals
    R3 = "R3"  # stays inside the drivable area
    R4 = "R4"  # no collisions (ACC and CAEM only)


class TtcResult(BaseModel):
    """Time to collision; None when the gap is not closing."""

    model_config = ConfigDict(frozen=True)

    value: Optional[float] = Field(None, ge=0.0)


class Verdict(BaseModel):
    """All checks for one episode."""

    model_config = ConfigDict(frozen=True)

    tc_id: TestCaseId
    function_id: FunctionId
    requirements: Dict[Requirement, CheckResult]
    goal: CheckResult

    @computed_field  # type: ignore[prop-decorator]
    @property
    def overall(self) -> bool:
        """Pass iff no applicable check failed."""
        checks = [*self.requirements.values(), self.goal]
        return not any(check.failed for check in checks)


class Stage(str, Enum):
    """Pipeline stage reached by a candidate, best first."""

    PASSED = "passed"
    EXECUTED_FAILED = "executed_failed"
    NON_EXECUTABLE = "non_executable"
    NON_COMPILABLE = "non_compilable"

    @property
    def rank(self) -> int:
        """0 is best."""
        return list(Stage).index(self)


class FailureMode(str, Enum):
    """Catalogue of failure root causes."""

    NO_CODE_EMITTED = "NO_CODE_EMITTED"
    SYNTAX_ERROR = "SYNTAX_ERROR"
    BAD_INTERFACE_ACCESS = "BAD_INTERFACE_ACCESS"
    EXTRANEOUS_CODE = "EXTRANEOUS_CODE"
    DIVISION_BY_ZERO = "DIVISION_BY_ZERO"
    WRONG_TARGET_SELECTION = "WRONG_TARGET_SELECTION"
    ALTERNATIVE_STRATEGY = "ALTERNATIVE_STRATEGY"
    EXCESS_LANE_CHANGE = "EXCESS_LANE_CHANGE"
    BAD_THRESHOLD = "BAD_THRESHOLD"
    NO_ACTION = "NO_ACTION"


class FailureEvidence(BaseModel):
    """A failure mode with the evidence that attached it."""

    model_config = ConfigDict(frozen=True)

    mode: FailureMode
    detail: str
    tc_id: Optional[TestCaseId] = None
    tick: Optional[int] = None
    location: Optional[str] = Field(None, description="Static match location, line:column")


class EpisodeResult(BaseModel):
    """One test case run of a candidate."""

    tc_id: TestCaseId
    verdict: Verdict
    terminal: Terminal
    ticks: int
    trace_hash: str


class EvaluationOutcome(BaseModel):
    """Everything known about one candidate after evaluation."""

    meta: CandidateMeta
    stage: Stage
    compile: Optional[StageResult] = None
    episodes: List[EpisodeResult] = Field(default_factory=list)
    failure_modes: List[FailureEvidence] = Field(default_factory=list)
    source_length: int = 0
    wall_time_s: float = 0.0
    extraction_failure: Optional[str] = None
    evaluation_error: Optional[str] = Field(
        None, description="Unexpected harness exception raised while evaluating this candidate"
    )
    traces: Dict[TestCaseId, Trace] = Field(default_factory=dict, exclude=True)

    @model_validator(mode="after")
    def validate_passed_is_clean(self) -> "EvaluationOutcome":
        """Passed candidates carry no failure modes."""
        if self.stage == Stage.PASSED and self.failure_modes:
            raise ValueError("a passed outcome cannot carry failure modes")
        return self

    @property
    def tcs_passed(self) -> int:
        return sum(1 for episode in self.episodes if episode.verdict.overall)

    @property
    def modes(self) -> List[FailureMode]:
        """Distinct failure modes in classification order."""
        seen: List[FailureMode] = []
        for evidence in self.failure_modes:
            if evidence.mode not in seen:
                seen.append(evidence.mode)
        return seen

    @property
    def primary_mode(self) -> Optional[FailureMode]:
        return self.failure_modes[0].mode if self.failure_modes else None


class RunConfig(BaseModel):
    """One pipeline run: providers, adapter, selection and output."""

    run_id: str = Field("run", min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    providers: List[ProviderConfig] = Field(default_factory=list)
    adapter: Optional[CandidateAdapter] = None
    functions: List[FunctionId] = Field(
        default_factory=lambda: list(FunctionId), min_length=1
    )
    test_cases: Dict[FunctionId, List[TestCaseId]] = Field(
        default_factory=dict, description="Per-function test case overrides"
    )
    repeats: int = Field(20, ge=1)
    parallelism: Optional[int] = Field(None, ge=1)
    output_dir: str = "runs"
    keep_artifacts: bool = False
    template_path: Optional[str] = None


class CellCounts(BaseModel):
    """Gate counts for one matrix cell."""

    compiled: int = 0
    executed: int = 0
    passed: int = 0


class CellSummary(BaseModel):
    """Aggregates for one (model, function) cell."""

    model: str
    function_id: FunctionId
    repeats: int
    attempts: int
    complete: bool
    counts: CellCounts
    bands: Dict[Stage, int]
    tc_passes: Dict[TestCaseId, int]
    failure_histogram: Dict[FailureMode, int]
    pass_at_k: Dict[int, float]
    ranking: List[int] = Field(default_factory=list, description="Attempt indices, best first")
    note: Optional[str] = None


class MatrixReport(BaseModel):
    """Deterministic summary of a run directory."""

    run_id: str
    schema_version: int = 1
    config_hash: str
    pipeline_hash: str
    cells: List[CellSummary]
