"""Stage state machine: formal lifecycle for pipeline stages."""

from enum import Enum

from rlunlearn.utils.state_machine import StateMachine


class StageStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    SKIPPED = "skipped"


# Allowed transitions for the stage state machine
_STAGE_TRANSITIONS: dict[StageStatus, set[StageStatus]] = {
    StageStatus.PENDING: {StageStatus.RUNNING, StageStatus.SKIPPED},
    StageStatus.RUNNING: {StageStatus.SUCCESS, StageStatus.FAILED, StageStatus.SKIPPED},
    # Terminal states
    StageStatus.SUCCESS: set(),
    StageStatus.FAILED: set(),
    StageStatus.SKIPPED: set(),
}


class StageStateMachine(StateMachine[StageStatus]):
    """Per-stage state machine."""

    def __init__(self):
        super().__init__(StageStatus.PENDING, _STAGE_TRANSITIONS)

    def start(self) -> bool:
        return self.transition(StageStatus.RUNNING)

    def succeed(self) -> bool:
        return self.transition(StageStatus.SUCCESS)

    def fail(self) -> bool:
        return self.transition(StageStatus.FAILED)

    def skip(self) -> bool:
        return self.transition(StageStatus.SKIPPED)
