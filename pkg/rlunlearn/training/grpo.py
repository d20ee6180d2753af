"""Group-relative policy optimization with a clipped surrogate and KL regularization."""

import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from rlunlearn.concepts.lexicon import ConceptLexicon
from rlunlearn.config import RewardConfig, TrainConfig
from rlunlearn.environment.contexts import Context, Environment, Split, condition_resolver
from rlunlearn.errors import GroupTooSmall
from rlunlearn.policy.tabular import (
    TabularPolicy,
    containment_probability,
    kl_and_gradient,
    sample_batch,
    sequence_kl,
)
from rlunlearn.telemetry.metrics import record_iteration_metric
from rlunlearn.training.rewards import RewardFn, make_reward_fn
from rlunlearn.training.trainlog import IterationRecord, TrainLog
from rlunlearn.utils.seeding import derive_rng
from rlunlearn.workers.pool import WorkerPool

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Group:
    """J rollouts for one (context, prompt) with their rewards and advantages.

    Attributes:
        sequences: (J, L) token ids.
        behavior_log_probs: (J, L) per-token log-probabilities under the
            behavior policy that produced the samples.
        rewards: (J,) scalar rewards.
        advantages: (J,) group-normalized advantages.
    """

    context_id: int
    prompt_id: int
    condition: str
    sequences: np.ndarray
    behavior_log_probs: np.ndarray
    rewards: np.ndarray
    advantages: np.ndarray

    def __post_init__(self):
        j = self.sequences.shape[0]
        if self.behavior_log_probs.shape != self.sequences.shape:
            raise ValueError("behavior_log_probs must match sequences")
        if self.rewards.shape != (j,) or self.advantages.shape != (j,):
            raise ValueError("rewards and advantages need one entry per sequence")

    @property
    def size(self) -> int:
        return int(self.sequences.shape[0])

    def to_dict(self, vocab) -> dict[str, Any]:
        return {
            "context_id": self.context_id,
            "prompt_id": self.prompt_id,
            "condition": self.condition,
            "sequences": [vocab.decode(s) for s in self.sequences],
            "rewards": [float(r) for r in self.rewards],
            "advantages": [float(a) for a in self.advantages],
        }


def compute_advantages(
    rewards: Sequence[float], adv_eps: float = 1e-6, std: str = "population"
) -> np.ndarray:
    """``(r - mean) / (std + adv_eps)`` within one group.

    Args:
        rewards: J >= 2 rewards.
        adv_eps: Denominator offset.
        std: ``population`` (divide by J) or ``sample`` (divide by J - 1).

    Raises:
        GroupTooSmall: fewer than two rewards.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise GroupTooSmall(f"need at least 2 rewards, got {r.size}")
    if np.all(r == r[0]):
        return np.zeros_like(r)
    sigma = r.std(ddof=0 if std == "population" else 1)
    return (r - r.mean()) / (sigma + adv_eps)


def clipped_term(ratio: float, advantage: float, clip_eps: float) -> float:
    """``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    clipped = min(max(ratio, 1.0 - clip_eps), 1.0 + clip_eps)
    return min(ratio * advantage, clipped * advantage)


def batch_states(policy: TabularPolicy, sequences: np.ndarray) -> np.ndarray:
    """State index at every position of every row of ``sequences``."""
    states = np.empty_like(sequences)
    current = np.zeros(sequences.shape[0], dtype=sequences.dtype)
    for t in range(sequences.shape[1]):
        states[:, t] = current
        if t < sequences.shape[1] - 1:
            current = policy.next_state[current, sequences[:, t]]
    return states


def rollout_group(
    behavior: TabularPolicy,
    context: Context,
    prompt_id: int,
    group_size: int,
    rng: np.random.Generator,
    *,
    condition: str,
    reward_fn: RewardFn,
    adv_eps: float = 1e-6,
    advantage_std: str = "population",
) -> Group:
    """Sample a group from the behavior policy and score it."""
    if group_size < 2:
        raise GroupTooSmall(f"group size must be at least 2, got {group_size}")
    seqs = sample_batch(behavior, condition, rng, group_size)
    rows = behavior.rows(condition)
    behavior_lp = rows[batch_states(behavior, seqs), seqs]
    rewards = np.array([reward_fn(context, tuple(int(t) for t in s)) for s in seqs])
    return Group(
        context_id=context.id,
        prompt_id=prompt_id,
        condition=condition,
        sequences=seqs,
        behavior_log_probs=behavior_lp,
        rewards=rewards,
        advantages=compute_advantages(rewards, adv_eps, advantage_std),
    )


def _accumulate_score(
    grad_rows: np.ndarray, probs: np.ndarray, states: np.ndarray, tokens: np.ndarray, coef
) -> None:
    # d log pi(w|s) / d logit[s, v] = 1[v = w] - pi(v|s)
    np.add.at(grad_rows, (states, tokens), coef)
    row_weight = np.zeros(grad_rows.shape[0])
    np.add.at(row_weight, states, coef)
    grad_rows -= row_weight[:, None] * probs


def surrogate_and_gradient(
    current: TabularPolicy,
    behavior: TabularPolicy,
    reference: TabularPolicy,
    groups: Sequence[Group],
    cfg: TrainConfig,
) -> tuple[float, np.ndarray]:
    """Clipped surrogate minus ``beta`` times KL to the reference, and its gradient.

    The surrogate averages tokens within a sequence, sequences within a group
    and groups within the batch. Tokens whose min picks the clipped branch
    contribute no gradient. The exact KL term is the mean over groups of the
    sequence-level KL of the group's condition; the ``k3`` estimator instead
    averages ``exp(d) - d - 1`` with ``d = log ref - log current`` over the
    sampled tokens.

    Returns:
        (objective, gradient with the shape of ``current.logits``).
    """
    if not groups:
        raise ValueError("surrogate needs at least one group")
    for other in (behavior, reference):
        if not current.same_space(other):
            raise ValueError("current, behavior and reference policies must share one space")

    n_groups = len(groups)
    length = current.length
    low, high = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
    log_probs = current.log_prob_table()
    probs = np.exp(log_probs)
    ref_log_probs = reference.log_prob_table()
    use_k3 = cfg.beta > 0 and cfg.kl_estimator == "k3"

    grad = np.zeros_like(current.logits)
    surrogate = 0.0
    kl = 0.0
    for g in groups:
        c = current.condition_index(g.condition)
        states = batch_states(current, g.sequences)
        lp = log_probs[c][states, g.sequences]
        ratio = np.exp(lp - g.behavior_log_probs)
        adv = g.advantages[:, None]
        scale = 1.0 / (n_groups * g.size * length)

        terms = np.minimum(ratio * adv, np.clip(ratio, low, high) * adv)
        surrogate += float(terms.sum()) * scale
        clipped = ((adv > 0) & (ratio > high)) | ((adv < 0) & (ratio < low))
        coef = np.where(clipped, 0.0, adv * ratio) * scale

        if use_k3:
            delta = ref_log_probs[c][states, g.sequences] - lp
            kl += float((np.expm1(delta) - delta).sum()) * scale
            coef = coef + cfg.beta * np.expm1(delta) * scale
        _accumulate_score(grad[c], probs[c], states, g.sequences, coef)

    if cfg.beta > 0 and not use_k3:
        cache: dict[str, tuple[float, np.ndarray]] = {}
        for g in groups:
            if g.condition not in cache:
                cache[g.condition] = kl_and_gradient(current, reference, g.condition)
            kl_g, grad_g = cache[g.condition]
            kl += kl_g / n_groups
            grad[current.condition_index(g.condition)] -= cfg.beta * grad_g / n_groups

    return surrogate - cfg.beta * kl, grad


def _pick(contexts: list[Context], k: int, rng: np.random.Generator) -> list[Context]:
    idx = rng.choice(len(contexts), size=k, replace=False)
    return [contexts[i] for i in sorted(idx)]


def train(
    env: Environment,
    policy: TabularPolicy,
    lex: ConceptLexicon,
    reward_cfg: RewardConfig,
    train_cfg: TrainConfig,
    *,
    reference: Optional[TabularPolicy] = None,
    granularity: str = "class",
    seed: int = 0,
    pool: Optional[WorkerPool] = None,
    rollout_sink: Optional[Callable[[dict[str, Any]], None]] = None,
) -> tuple[TabularPolicy, TrainLog]:
    """Run the reinforcement stage.

    Each iteration samples an equal number of forget and retain train
    contexts, rolls out one group per (context, prompt) from a frozen
    behavior snapshot, then takes ``inner_epochs`` gradient-ascent steps.

    Args:
        env: Environment providing train contexts.
        policy: Starting policy (normally the cold-started one).
        lex: Lexicon for rewards and emission masses.
        reward_cfg: Reward weights, already adjusted for ``train_cfg.mode``.
        train_cfg: Optimization settings.
        reference: KL anchor; defaults to ``policy``.
        granularity: Condition granularity the policy was built with.
        seed: Master seed, used when ``train_cfg.seed`` is unset.
        pool: Worker pool for rollouts; sequential when None.
        rollout_sink: Receives one dict per group when given.

    Returns:
        (trained policy, training log)
    """
    seed = train_cfg.seed if train_cfg.seed is not None else seed
    reference = reference if reference is not None else policy
    condition_of = condition_resolver(env, granularity)
    forget_train = env.train_contexts(Split.FORGET)
    retain_train = env.train_contexts(Split.RETAIN)
    per_split = min(train_cfg.contexts_per_split, len(forget_train), len(retain_train))
    if per_split == 0:
        raise ValueError("training needs at least one forget and one retain train context")
    prompt_ids = set(train_cfg.train_prompt_ids or env.prompt_ids)
    if not prompt_ids & set(env.prompt_ids):
        raise ValueError(f"train_prompt_ids {sorted(prompt_ids)} match no context prompts")
    forget_conditions = sorted({condition_of(c.id, p) for c in forget_train for p in c.prompt_ids})
    reward_fn = make_reward_fn(lex, reward_cfg, train_cfg.mode)

    def masses(p: TabularPolicy) -> tuple[float, float]:
        forget = np.mean([containment_probability(p, c, lex.penalized) for c in forget_conditions])
        hyper = np.mean(
            [containment_probability(p, c, lex.forget_hypernyms) for c in forget_conditions]
        )
        return float(forget), float(hyper)

    initial_forget, initial_hyper = masses(policy)
    log = TrainLog(
        meta={
            "mode": train_cfg.mode.value,
            "kl_estimator": train_cfg.kl_estimator,
            "seed": seed,
            "iterations": train_cfg.iterations,
            "group_size": train_cfg.group_size,
            "lr": train_cfg.lr,
            "beta": train_cfg.beta,
            "clip_eps": train_cfg.clip_eps,
            "lambda1": reward_cfg.lambda1,
            "lambda2": reward_cfg.lambda2,
            "contexts_per_split": per_split,
            "train_prompt_ids": sorted(prompt_ids),
            "initial_forget_mass": initial_forget,
            "initial_hypernym_mass": initial_hyper,
        }
    )
    logger.info(
        f"Training {train_cfg.iterations} iterations ({train_cfg.mode.value}, "
        f"kl={train_cfg.kl_estimator}): forget mass {initial_forget:.4f}, "
        f"hypernym mass {initial_hyper:.4f}"
    )

    current = policy
    pool = pool or WorkerPool(1)
    for it in range(train_cfg.iterations):
        started = time.perf_counter()
        batch_rng = derive_rng(seed, "batch", it)
        chosen = _pick(forget_train, per_split, batch_rng) + _pick(
            retain_train, per_split, batch_rng
        )
        items = [(ctx, p) for ctx in chosen for p in ctx.prompt_ids if p in prompt_ids]
        behavior = current

        def run(item, behavior=behavior, it=it) -> Group:
            ctx, p = item
            return rollout_group(
                behavior,
                ctx,
                p,
                train_cfg.group_size,
                derive_rng(seed, "rollout", it, ctx.id, p),
                condition=condition_of(ctx.id, p),
                reward_fn=reward_fn,
                adv_eps=train_cfg.adv_eps,
                advantage_std=train_cfg.advantage_std,
            )

        groups = pool.map(run, items)
        degenerate = sum(1 for g in groups if not np.any(g.advantages))
        logger.debug(f"Iteration {it}: {len(groups)} groups, {degenerate} with zero variance")

        objective = 0.0
        for _ in range(train_cfg.inner_epochs):
            objective, grad = surrogate_and_gradient(current, behavior, reference, groups, train_cfg)
            current = current.with_logits(current.logits + train_cfg.lr * grad)

        forget_rewards = [
            r for g in groups if env.context(g.context_id).split == Split.FORGET for r in g.rewards
        ]
        retain_rewards = [
            r for g in groups if env.context(g.context_id).split == Split.RETAIN for r in g.rewards
        ]
        batch_conditions = sorted({g.condition for g in groups})
        kl = float(np.mean([sequence_kl(current, reference, c) for c in batch_conditions]))
        forget_mass, hyper_mass = masses(current)
        record = IterationRecord(
            iteration=it,
            forget_reward=float(np.mean(forget_rewards)),
            retain_reward=float(np.mean(retain_rewards)),
            kl=kl,
            forget_mass=forget_mass,
            hypernym_mass=hyper_mass,
            objective=float(objective),
            groups=len(groups),
            wall_time=time.perf_counter() - started if train_cfg.record_wall_time else None,
        )
        log.append(record)
        record_iteration_metric(
            train_cfg.mode.value, record.forget_reward, record.retain_reward, kl, forget_mass
        )
        if rollout_sink is not None:
            for g in groups:
                rollout_sink({"iteration": it, **g.to_dict(lex.vocab)})
        if (it + 1) % train_cfg.log_every == 0 or it + 1 == train_cfg.iterations:
            logger.info(
                f"Iteration {it + 1}/{train_cfg.iterations}: "
                f"forget_reward={record.forget_reward:.4f} "
                f"retain_reward={record.retain_reward:.4f} kl={kl:.5f} "
                f"forget_mass={forget_mass:.4f} hypernym_mass={hyper_mass:.4f}"
            )
    return current, log
