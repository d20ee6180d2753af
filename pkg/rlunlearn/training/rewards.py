"""Keyword rewards for forget and retain contexts."""

from typing import Callable, Sequence

from rlunlearn.concepts.lexicon import ConceptLexicon, contains_any
from rlunlearn.config import AbstractionMode, RewardConfig, TrainingMode
from rlunlearn.environment.contexts import Context, Split

RewardFn = Callable[[Context, Sequence[int]], float]


def reward_pen(seq: Sequence[int], lex: ConceptLexicon, lambda1: float) -> float:
    """Minus ``lambda1`` per forget keyword or synonym occurrence."""
    hits = sum(1 for t in seq if t in lex.penalized)
    return 0.0 - lambda1 * hits


def reward_abs(
    seq: Sequence[int],
    lex: ConceptLexicon,
    lambda2: float,
    mode: AbstractionMode = AbstractionMode.PRESENCE,
) -> float:
    """``lambda2`` when ``seq`` names a hypernym of the forgotten concept.

    Presence mode pays once per sequence; count mode pays per occurrence.
    """
    if mode == AbstractionMode.COUNT:
        return lambda2 * sum(1 for t in seq if t in lex.forget_hypernyms)
    return lambda2 if contains_any(seq, lex.forget_hypernyms) else 0.0


def reward_forget(seq: Sequence[int], lex: ConceptLexicon, cfg: RewardConfig) -> float:
    return reward_pen(seq, lex, cfg.lambda1) + reward_abs(
        seq, lex, cfg.lambda2, cfg.abstraction_mode
    )


def reward_retain(seq: Sequence[int], lex: ConceptLexicon) -> float:
    """1 when any retain keyword appears, however often."""
    return 1.0 if contains_any(seq, lex.retain_keywords) else 0.0


def assign_reward(
    context: Context,
    seq: Sequence[int],
    lex: ConceptLexicon,
    cfg: RewardConfig,
    retain_enabled: bool = True,
) -> float:
    """Forget reward on forget contexts, retain reward elsewhere."""
    if context.split == Split.FORGET:
        return reward_forget(seq, lex, cfg)
    return reward_retain(seq, lex) if retain_enabled else 0.0


def make_reward_fn(
    lex: ConceptLexicon, cfg: RewardConfig, mode: TrainingMode = TrainingMode.COMPOSITE
) -> RewardFn:
    """Bind the lexicon and weights; ``cfg`` should already reflect ``mode``."""
    retain_enabled = mode != TrainingMode.NO_RETAIN

    def reward(context: Context, seq: Sequence[int]) -> float:
        return assign_reward(context, seq, lex, cfg, retain_enabled)

    return reward
