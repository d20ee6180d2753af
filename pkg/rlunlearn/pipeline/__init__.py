"""Stage registry, stages and the runner that strings them together."""

from rlunlearn.pipeline.acceptance import CheckResult, run_acceptance, run_checks
from rlunlearn.pipeline.registry import StageInfo, StageRegistry, stage, stage_registry
from rlunlearn.pipeline.runner import PipelineRunner, run_pipeline, run_stage
from rlunlearn.pipeline.stages import RunContext
from rlunlearn.pipeline.state import StageStateMachine, StageStatus

__all__ = [
    "CheckResult",
    "PipelineRunner",
    "RunContext",
    "StageInfo",
    "StageRegistry",
    "StageStateMachine",
    "StageStatus",
    "run_acceptance",
    "run_checks",
    "run_pipeline",
    "run_stage",
    "stage",
    "stage_registry",
]
