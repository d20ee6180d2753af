"""Experiment configuration models."""

import hashlib
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from rlunlearn.errors import ConfigError, MissingArtifact
from rlunlearn.utils.serializer import ArtifactSerializer

logger = logging.getLogger(__name__)

SLOT = "_"

DEFAULT_TEMPLATES: dict[int, list[list[str]]] = {
    0: [
        ["a", SLOT, "in", "field"],
        ["the", SLOT, "stands", "here"],
        ["a", SLOT, "on", "grass"],
    ],
    1: [
        ["photo", "of", "a", SLOT],
        ["here", "is", "a", SLOT],
    ],
}


class TrainingMode(str, Enum):
    """Reward ablations for the reinforcement stage."""

    COMPOSITE = "composite"
    PENALTY_ONLY = "penalty-only"
    NO_PENALTY = "no-penalty"
    NO_RETAIN = "no-retain"


class AbstractionMode(str, Enum):
    PRESENCE = "presence"
    COUNT = "count"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvironmentConfig(_Section):
    """Synthetic context generation."""

    n_contexts: int = Field(default=40, ge=0)
    split_ratio: tuple[int, int] = (4, 1)
    forget_fraction: float = Field(default=0.25, gt=0.0, lt=1.0)
    concepts: Optional[list[str]] = None
    prompt_ids: list[int] = Field(default_factory=lambda: [0, 1], min_length=1)
    templates: dict[int, list[list[str]]] = Field(
        default_factory=lambda: {k: [list(t) for t in v] for k, v in DEFAULT_TEMPLATES.items()}
    )
    captions_per_prompt: int = Field(default=2, ge=1)
    abstraction_captions_per_prompt: int = Field(default=1, ge=0)

    @field_validator("split_ratio")
    @classmethod
    def _positive_ratio(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("split_ratio entries must be positive")
        return v

    @model_validator(mode="after")
    def _templates_cover_prompts(self) -> "EnvironmentConfig":
        missing = [p for p in self.prompt_ids if not self.templates.get(p)]
        if missing:
            raise ValueError(f"no caption templates for prompt ids {missing}")
        return self


class PolicyConfig(_Section):
    """Tabular policy shape."""

    length: int = Field(default=4, ge=1)
    granularity: Literal["class", "context"] = "class"
    history: Literal["markov", "full"] = "markov"
    init_scale: float = Field(default=0.1, ge=0.0)
    enumeration_cap: int = Field(default=1_000_000, ge=1)

    @model_validator(mode="after")
    def _full_history_is_small(self) -> "PolicyConfig":
        if self.history == "full" and self.length > 3:
            raise ValueError("full-history policies support length <= 3")
        return self


class ColdStartConfig(_Section):
    """Base-model pretraining and cold-start maximum likelihood."""

    pretrain_lr: float = Field(default=4.0, gt=0.0)
    pretrain_epochs: int = Field(default=400, ge=0)
    lr: float = Field(default=4.0, gt=0.0)
    epochs: int = Field(default=100, ge=0)
    retain_pool: Optional[list[str]] = None


class RewardConfig(_Section):
    """Composite forget reward weights.

    Attributes:
        lambda1: Penalty per forget keyword or synonym occurrence.
        lambda2: Bonus for abstracting to a hypernym of the forgotten concept.
        abstraction_mode: ``presence`` pays lambda2 once per sequence, ``count``
            once per hypernym occurrence.
    """

    lambda1: float = Field(default=0.3, ge=0.0)
    lambda2: float = Field(default=0.5, ge=0.0)
    abstraction_mode: AbstractionMode = AbstractionMode.PRESENCE

    @field_validator("lambda1", "lambda2")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("reward weights must be finite")
        return v


class TrainConfig(_Section):
    """Group-relative policy optimization settings."""

    group_size: int = Field(default=5, ge=2)
    clip_eps: float = Field(default=0.2, gt=0.0, lt=1.0)
    beta: float = Field(default=0.01, ge=0.0)
    adv_eps: float = Field(default=1e-6, ge=0.0)
    advantage_std: Literal["population", "sample"] = "population"
    lr: float = Field(default=20.0, gt=0.0)
    iterations: int = Field(default=500, ge=0)
    inner_epochs: int = Field(default=1, ge=1)
    contexts_per_split: int = Field(default=4, ge=1)
    train_prompt_ids: Optional[list[int]] = None
    mode: TrainingMode = TrainingMode.COMPOSITE
    reference: Literal["coldstart", "base"] = "coldstart"
    kl_estimator: Literal["exact", "k3"] = "exact"
    skip_coldstart: bool = False
    seed: Optional[int] = Field(default=None, ge=0)
    log_every: int = Field(default=50, ge=1)
    record_wall_time: bool = False
    log_rollouts: bool = False


class EvaluationConfig(_Section):
    """Held-out sampling protocol."""

    samples_per_context: int = Field(default=20, ge=1)
    temperature: float = Field(default=0.2, gt=0.0)
    prompt_ids: Optional[list[int]] = None
    judge: Literal["rule", "subprocess"] = "rule"
    judge_command: Optional[list[str]] = None

    @model_validator(mode="after")
    def _command_for_subprocess(self) -> "EvaluationConfig":
        if self.judge == "subprocess" and not self.judge_command:
            raise ValueError("judge 'subprocess' requires judge_command")
        return self


class LemmaConfig(_Section):
    """Closed-form hallucination analysis."""

    enabled: bool = True
    beta: float = Field(default=1.0, gt=0.0)
    lambda1: Optional[float] = Field(default=None, gt=0.0)
    lambda2: Optional[float] = Field(default=None, gt=0.0)
    instances: int = Field(default=200, ge=0)
    max_vocab: int = Field(default=10, ge=4)
    max_length: int = Field(default=3, ge=1)
    lambda_grid: list[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0, 2.0])


class ExperimentConfig(_Section):
    """Top-level experiment configuration.

    Attributes:
        lexicon: Path to a lexicon JSON file, or None for the bundled preset.
        seed: Master seed; every stage derives its own stream from it.
        output_dir: Directory receiving all run artifacts.
        concurrency: Worker threads; falls back to RLUNLEARN_CONCURRENCY.
    """

    lexicon: Optional[str] = None
    environment: EnvironmentConfig = Field(default_factory=EnvironmentConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    coldstart: ColdStartConfig = Field(default_factory=ColdStartConfig)
    rewards: RewardConfig = Field(default_factory=RewardConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    lemma: LemmaConfig = Field(default_factory=LemmaConfig)
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str = "runs/default"
    concurrency: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _lengths_agree(self) -> "ExperimentConfig":
        for prompt_id, templates in self.environment.templates.items():
            for template in templates:
                if len(template) != self.policy.length:
                    raise ValueError(
                        f"template {template} for prompt {prompt_id} has length "
                        f"{len(template)}, expected {self.policy.length}"
                    )
        return self

    def effective_rewards(self) -> RewardConfig:
        """Reward weights after applying the training mode."""
        mode = self.train.mode
        if mode == TrainingMode.PENALTY_ONLY:
            return self.rewards.model_copy(update={"lambda2": 0.0})
        if mode == TrainingMode.NO_PENALTY:
            return self.rewards.model_copy(update={"lambda1": 0.0})
        return self.rewards

    def resolved_concurrency(self) -> int:
        if self.concurrency is not None:
            return self.concurrency
        return max(1, int(os.environ.get("RLUNLEARN_CONCURRENCY", "1")))

    def digest(self) -> str:
        """sha256 over the canonical serialization, ignoring where outputs go."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "concurrency"})
        return hashlib.sha256(ArtifactSerializer.serialize(payload)).hexdigest()


def _describe(error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{key}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a raw mapping, raising ConfigError that names offending keys."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_describe(e)}") from e


def load_config(path: Union[str, Path, None] = None, **overrides) -> ExperimentConfig:
    """Load a config file (or defaults) and apply top-level overrides.

    Args:
        path: JSON config file; None uses defaults.
        **overrides: Dotted keys such as ``seed`` or ``train.mode`` whose
            values are not None.

    Returns:
        Validated ExperimentConfig.
    """
    data: dict = {}
    if path is not None:
        try:
            data = ArtifactSerializer.read(Path(path))
        except MissingArtifact as e:
            raise ConfigError(f"Config file {path} does not exist") from e
        except ValueError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            target = target.setdefault(p, {})
        target[leaf] = value
    config = parse_config(data)
    logger.debug(f"Loaded configuration {config.digest()[:12]} from {path or 'defaults'}")
    return config


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()
