"""Tests for group-relative policy optimization."""

import numpy as np
import pytest

from rlunlearn.config import RewardConfig, TrainConfig
from rlunlearn.errors import GroupTooSmall
from rlunlearn.pipeline.acceptance import gradient_error, random_surrogate_case
from rlunlearn.policy.tabular import init_policy
from rlunlearn.training.grpo import (
    Group,
    batch_states,
    clipped_term,
    compute_advantages,
    rollout_group,
    surrogate_and_gradient,
    train,
)
from rlunlearn.training.rewards import make_reward_fn
from rlunlearn.training.trainlog import TrainLog
from rlunlearn.utils.seeding import derive_rng
from rlunlearn.workers.pool import WorkerPool


def test_advantages_of_single_success():
    adv = compute_advantages([1, 0, 0, 0, 0])
    assert adv[0] == pytest.approx(0.8 / (0.4 + 1e-6))
    np.testing.assert_allclose(adv[1:], -0.2 / (0.4 + 1e-6))
    assert adv[0] == pytest.approx(2.0, abs=1e-4)
    assert adv.sum() == pytest.approx(0.0, abs=1e-12)


def test_equal_rewards_give_zero_advantages():
    assert not np.any(compute_advantages([0.3, 0.3, 0.3]))


def test_sample_std():
    adv = compute_advantages([1.0, 0.0], adv_eps=0.0, std="sample")
    np.testing.assert_allclose(adv, [0.5 / np.sqrt(0.5), -0.5 / np.sqrt(0.5)])


def test_group_too_small():
    with pytest.raises(GroupTooSmall):
        compute_advantages([1.0])


@pytest.mark.parametrize(
    "ratio,advantage,expected",
    [
        (1.5, 1.0, 1.2),
        (1.5, -1.0, -1.5),
        (0.5, 1.0, 0.5),
        (0.5, -1.0, -0.8),
        (1.0, 2.0, 2.0),
    ],
)
def test_clipped_term(ratio, advantage, expected):
    assert clipped_term(ratio, advantage, 0.2) == pytest.approx(expected)


def test_group_shapes_are_checked():
    with pytest.raises(ValueError, match="one entry per sequence"):
        Group(
            context_id=0,
            prompt_id=0,
            condition="x",
            sequences=np.ones((3, 2), dtype=np.int64),
            behavior_log_probs=np.zeros((3, 2)),
            rewards=np.zeros(2),
            advantages=np.zeros(3),
        )


def _on_policy(current, groups, zero_advantages=False):
    """Rescore the groups as if ``current`` had sampled them."""
    out = []
    for g in groups:
        lp = current.rows(g.condition)[batch_states(current, g.sequences), g.sequences]
        adv = np.zeros_like(g.advantages) if zero_advantages else g.advantages
        out.append(Group(g.context_id, g.prompt_id, g.condition, g.sequences, lp, g.rewards, adv))
    return out


def test_surrogate_is_zero_on_policy_without_advantage():
    current, _, reference, groups, _ = random_surrogate_case(3, 0)
    flat = _on_policy(current, groups, zero_advantages=True)
    value, grad = surrogate_and_gradient(current, current, reference, flat, TrainConfig(beta=0.0))
    assert value == 0.0
    assert not np.any(grad)


def test_surrogate_on_policy_equals_mean_advantage():
    """With current == behavior every ratio is 1, so the surrogate is the mean advantage."""
    current, _, reference, groups, _ = random_surrogate_case(4, 1)
    rescored = _on_policy(current, groups)
    value, _ = surrogate_and_gradient(current, current, reference, rescored, TrainConfig(beta=0.0))
    assert value == pytest.approx(np.mean([g.advantages.mean() for g in rescored]), abs=1e-12)


@pytest.mark.parametrize("index", range(5))
def test_surrogate_gradient_matches_finite_differences(index):
    assert gradient_error(21, index) < 1e-5


def _policy(env, lex, seed=0):
    return init_policy(lex.vocab, env.conditions("class"), 3, 0.0, derive_rng(seed, "policy"))


def test_rollout_group(toy_env, lex):
    policy = _policy(toy_env, lex)
    reward_fn = make_reward_fn(lex, RewardConfig())
    group = rollout_group(
        policy,
        toy_env.context(0),
        0,
        6,
        derive_rng(1, "r"),
        condition="dog/p0",
        reward_fn=reward_fn,
    )
    assert group.sequences.shape == (6, 3)
    assert group.rewards.shape == (6,)
    assert group.advantages.mean() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(GroupTooSmall):
        rollout_group(
            policy,
            toy_env.context(0),
            0,
            1,
            derive_rng(1, "r"),
            condition="dog/p0",
            reward_fn=reward_fn,
        )


def test_zero_iterations_leaves_policy_unchanged(toy_env, lex):
    policy = _policy(toy_env, lex)
    trained, log = train(toy_env, policy, lex, RewardConfig(), TrainConfig(iterations=0))
    np.testing.assert_array_equal(trained.logits, policy.logits)
    assert len(log) == 0
    assert log.meta["iterations"] == 0
    assert log.meta["initial_forget_mass"] > 0


def test_unmatched_train_prompts_are_rejected(toy_env, lex):
    policy = _policy(toy_env, lex)
    with pytest.raises(ValueError, match="match no context prompts"):
        train(toy_env, policy, lex, RewardConfig(), TrainConfig(train_prompt_ids=[7]))


def test_training_is_deterministic_across_thread_counts(toy_env, lex):
    policy = _policy(toy_env, lex)
    cfg = TrainConfig(iterations=3, group_size=4, lr=5.0)
    a, log_a = train(toy_env, policy, lex, RewardConfig(), cfg, seed=5)
    with WorkerPool(3) as pool:
        b, log_b = train(toy_env, policy, lex, RewardConfig(), cfg, seed=5, pool=pool)
    np.testing.assert_array_equal(a.logits, b.logits)
    assert log_a.to_lines() == log_b.to_lines()


def test_training_reduces_forget_mass(toy_env, lex):
    policy = _policy(toy_env, lex)
    cfg = TrainConfig(iterations=20, group_size=8, lr=20.0)
    _, log = train(toy_env, policy, lex, RewardConfig(), cfg, seed=1)
    assert len(log) == 20
    assert log.records[-1].forget_mass < log.meta["initial_forget_mass"]


def test_rollout_sink_and_log_round_trip(toy_env, lex, tmp_path):
    seen = []
    cfg = TrainConfig(iterations=2, group_size=3)
    _, log = train(
        toy_env, _policy(toy_env, lex), lex, RewardConfig(), cfg, seed=2, rollout_sink=seen.append
    )
    # one forget and one retain context, two prompts each
    assert len(seen) == 2 * 2 * 2
    assert {line["iteration"] for line in seen} == {0, 1}
    path = log.write(tmp_path / "trainlog.jsonl")
    back = TrainLog.read(path)
    assert back.records == log.records
    assert back.meta == log.meta
