"""Stage registry for the experiment pipeline."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class StageInfo:
    """Metadata about a registered stage.

    Attributes:
        func: Callable taking the run context.
        name: Stage name, also the CLI subcommand.
        requires: Artifact file names that must exist before the stage runs.
        produces: Artifact file names the stage writes.
        parallel: Whether the stage spreads work over the worker pool.
        enabled: Predicate on the config; the stage is skipped when it returns False.
    """

    func: Callable
    name: str
    requires: tuple[str, ...] = ()
    produces: tuple[str, ...] = ()
    parallel: bool = False
    enabled: Optional[Callable] = None
    module: str = ""


class StageRegistry:
    """Registry of stage functions, kept in registration order."""

    def __init__(self):
        self._stages: Dict[str, StageInfo] = {}

    def register(
        self,
        func: Callable,
        name: Optional[str] = None,
        requires: tuple[str, ...] = (),
        produces: tuple[str, ...] = (),
        parallel: bool = False,
        enabled: Optional[Callable] = None,
    ) -> Callable:
        stage_name = name or func.__name__.replace("_", "-")
        if stage_name in self._stages:
            logger.warning(f"Stage {stage_name} is already registered. Overwriting.")
        self._stages[stage_name] = StageInfo(
            func=func,
            name=stage_name,
            requires=tuple(requires),
            produces=tuple(produces),
            parallel=parallel,
            enabled=enabled,
            module=func.__module__,
        )
        logger.debug(f"Registered stage: {stage_name}")
        return func

    def get_stage(self, name: str) -> Optional[StageInfo]:
        return self._stages.get(name)

    def names(self) -> list[str]:
        return list(self._stages)

    def list_stages(self) -> Dict[str, StageInfo]:
        return self._stages.copy()


# Global stage registry
stage_registry = StageRegistry()


def stage(
    name: Optional[str] = None,
    *,
    requires: tuple[str, ...] = (),
    produces: tuple[str, ...] = (),
    parallel: bool = False,
    enabled: Optional[Callable] = None,
    registry: Optional[StageRegistry] = None,
):
    """Decorator registering a pipeline stage.

    Example:
        @stage("train", requires=("policy_cold.ckpt",), produces=("trainlog.jsonl",))
        def train_stage(run): ...
    """
    target = registry if registry is not None else stage_registry

    def decorator(f: Callable) -> Callable:
        return target.register(
            f, name, requires=requires, produces=produces, parallel=parallel, enabled=enabled
        )

    return decorator
