"""Runs registered stages in order and records their lifecycle."""

import logging
import time
from pathlib import Path
from typing import Optional, Sequence, Union

from rlunlearn.config import ExperimentConfig
from rlunlearn.errors import StageFailed
from rlunlearn.pipeline.registry import StageInfo, StageRegistry, stage_registry
from rlunlearn.pipeline.stages import MANIFEST, RunContext
from rlunlearn.pipeline.state import StageStateMachine, StageStatus
from rlunlearn.telemetry.metrics import record_stage_metric
from rlunlearn.telemetry.tracer import trace_stage
from rlunlearn.utils.serializer import ArtifactSerializer
from rlunlearn.workers.pool import WorkerPool

logger = logging.getLogger(__name__)

_STATUS_METRICS = {
    StageStatus.RUNNING: "started",
    StageStatus.SUCCESS: "succeeded",
    StageStatus.FAILED: "failed",
    StageStatus.SKIPPED: "skipped",
}


class PipelineRunner:
    """Executes stages against one run directory.

    Stage boundaries are barriers: a stage starts only after the previous one
    finished, and only stages flagged ``parallel`` receive the worker pool.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: Union[str, Path, None] = None,
        registry: Optional[StageRegistry] = None,
    ):
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.registry = registry or stage_registry
        self.machines: dict[str, StageStateMachine] = {}
        self._started: dict[str, float] = {}

    def status(self) -> dict[str, str]:
        return {name: m.state.value for name, m in self.machines.items()}

    def write_manifest(self) -> Path:
        """Merge this run's stage statuses into the manifest on disk."""
        path = self.out_dir / MANIFEST
        stages = {}
        if path.exists():
            previous = ArtifactSerializer.read(path)
            if previous.get("config_digest") == self.config.digest():
                stages = previous.get("stages", {})
        stages.update(self.status())
        return ArtifactSerializer.write(
            path,
            {"config_digest": self.config.digest(), "seed": self.config.seed, "stages": stages},
        )

    def _machine(self, name: str) -> StageStateMachine:
        machine = StageStateMachine()
        machine.on_transition(lambda old, new: self._observe(name, machine, new))
        return machine

    def _observe(self, name: str, machine: StageStateMachine, status: StageStatus) -> None:
        """Telemetry and logging for one stage transition."""
        if status == StageStatus.RUNNING:
            self._started[name] = time.perf_counter()
            logger.info(f"Stage {name}: started")
        duration_ms = None
        if machine.is_terminal and name in self._started:
            duration_ms = (time.perf_counter() - self._started.pop(name)) * 1000
        record_stage_metric(_STATUS_METRICS[status], name, duration_ms)
        if status == StageStatus.SKIPPED:
            logger.info(f"Stage {name}: skipped")
        elif status == StageStatus.SUCCESS:
            logger.info(f"Stage {name}: succeeded in {duration_ms / 1000:.1f}s")

    def _run_one(self, info: StageInfo, run: RunContext, pool: WorkerPool):
        machine = self.machines[info.name]
        if info.enabled is not None and not info.enabled(self.config):
            machine.skip()
            return None

        machine.start()
        run.pool = pool if info.parallel else None
        try:
            with trace_stage(info.name, self.config.seed, self.config.digest()):
                for name in info.requires:
                    run.require(name)
                result = info.func(run)
        except Exception as e:
            logger.error(f"Stage {info.name} failed: {e}")
            machine.fail()
            raise StageFailed(info.name, e) from e
        machine.succeed()
        return result

    def run(self, names: Optional[Sequence[str]] = None) -> dict[str, object]:
        """Run ``names`` (default: every registered stage) in registry order.

        Returns:
            Stage name to the value the stage function returned.

        Raises:
            StageFailed: a stage raised; artifacts written so far are kept.
        """
        wanted = self.registry.names() if names is None else list(names)
        unknown = [n for n in wanted if self.registry.get_stage(n) is None]
        if unknown:
            raise ValueError(f"Unknown stages: {unknown}")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name in wanted:
            self.machines[name] = self._machine(name)

        results: dict[str, object] = {}
        run = RunContext(self.config, self.out_dir)
        with WorkerPool(self.config.resolved_concurrency()) as pool:
            try:
                for name in self.registry.names():
                    if name in wanted:
                        results[name] = self._run_one(self.registry.get_stage(name), run, pool)
            finally:
                self.write_manifest()
        return results


def run_pipeline(
    config: ExperimentConfig, out_dir: Union[str, Path, None] = None
) -> dict[str, object]:
    """Run every stage, from environment generation to the report."""
    logger.info(f"Running pipeline {config.digest()[:12]} seed={config.seed}")
    return PipelineRunner(config, out_dir).run()


def run_stage(
    name: str, config: ExperimentConfig, out_dir: Union[str, Path, None] = None
) -> object:
    """Run a single stage from artifacts already on disk."""
    return PipelineRunner(config, out_dir).run([name])[name]
