"""Rewards and group-relative policy optimization."""

from rlunlearn.training.grpo import (
    Group,
    clipped_term,
    compute_advantages,
    rollout_group,
    surrogate_and_gradient,
    train,
)
from rlunlearn.training.rewards import (
    assign_reward,
    make_reward_fn,
    reward_abs,
    reward_forget,
    reward_pen,
    reward_retain,
)
from rlunlearn.training.trainlog import IterationRecord, TrainLog

__all__ = [
    "Group",
    "IterationRecord",
    "TrainLog",
    "assign_reward",
    "clipped_term",
    "compute_advantages",
    "make_reward_fn",
    "reward_abs",
    "reward_forget",
    "reward_pen",
    "reward_retain",
    "rollout_group",
    "surrogate_and_gradient",
    "train",
]
