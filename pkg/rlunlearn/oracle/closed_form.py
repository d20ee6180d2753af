"""Closed-form KL-regularized optima and the hallucination-reduction check.

For a reference distribution ``ref`` and sequence reward ``R`` the optimum of
``E[R] - beta * KL(pi || ref)`` is ``ref(y) * exp(R(y) / beta) / Z``. Adding
the abstraction bonus only raises the weight of hypernym-bearing sequences,
so ``Z`` grows while the numerator of every hallucinated, hypernym-free
sequence stays put. All sums here are taken in log space.
"""

import logging
from dataclasses import dataclass
from typing import AbstractSet, Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel
from scipy.special import logsumexp

from rlunlearn.concepts.lexicon import BOS_ID, ConceptLexicon
from rlunlearn.errors import DisjointnessViolation, PreconditionViolated
from rlunlearn.policy.distribution import EnumeratedDistribution
from rlunlearn.policy.tabular import DEFAULT_ENUMERATION_CAP, TabularPolicy, enumerate_distribution

logger = logging.getLogger(__name__)

SequenceRewards = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class HallucinationSpec:
    """Tokens that count as hallucinations for one input.

    Attributes:
        hallucinated_tokens: Object tokens absent from the input.
        grounded_objects: Objects present in the input; must not overlap.
        exempt_tokens: A sequence containing one of these is never counted.
    """

    hallucinated_tokens: frozenset[int]
    grounded_objects: frozenset[int] = frozenset()
    exempt_tokens: frozenset[int] = frozenset()

    def __post_init__(self):
        overlap = self.hallucinated_tokens & self.grounded_objects
        if overlap:
            raise DisjointnessViolation(
                f"hallucinated tokens {sorted(overlap)} are grounded in the input"
            )

    def with_exemptions(self, tokens: AbstractSet[int]) -> "HallucinationSpec":
        return HallucinationSpec(
            self.hallucinated_tokens, self.grounded_objects, self.exempt_tokens | frozenset(tokens)
        )


def hallucination_spec_for(lex: ConceptLexicon, grounded: AbstractSet[int]) -> HallucinationSpec:
    """Object tokens naming something other than ``grounded`` (or a synonym of it)."""
    grounded = frozenset(grounded)
    hallucinated = lex.object_tokens - grounded - lex.synonyms_of(grounded)
    return HallucinationSpec(frozenset(hallucinated), grounded, lex.forget_hypernyms)


class InstanceDescriptor(BaseModel):
    vocab_size: int
    length: int
    beta: float
    lambda1: float
    lambda2: float
    seed: Optional[int] = None


class LemmaReport(BaseModel):
    """Penalty-only versus composite optimum for one condition.

    ``verdict`` is true iff both the partition function rises and the
    hallucination probability falls, strictly.
    """

    condition: str
    instance: InstanceDescriptor
    method: Literal["enumeration", "recursion"]
    log_z_pen: float
    log_z_comp: float
    z_pen: float
    z_comp: float
    p_hallu_ref: float
    p_hallu_pen: float
    p_hallu_comp: float
    hypernym_mass: float
    pointwise: Optional[bool] = None
    verdict: bool

    @property
    def z_margin(self) -> float:
        return self.z_comp - self.z_pen

    @property
    def p_margin(self) -> float:
        return self.p_hallu_pen - self.p_hallu_comp


def _rewards_array(dist: EnumeratedDistribution, rewards: SequenceRewards) -> np.ndarray:
    values = rewards(dist.sequences) if callable(rewards) else rewards
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (dist.size,):
        raise ValueError(f"rewards shape {values.shape} does not match {dist.size} sequences")
    return values


def log_partition_function(
    ref: EnumeratedDistribution, rewards: SequenceRewards, beta: float
) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return float(logsumexp(ref.log_probs + _rewards_array(ref, rewards) / beta))


def partition_function(ref: EnumeratedDistribution, rewards: SequenceRewards, beta: float) -> float:
    """``Z = sum_y ref(y) * exp(R(y) / beta)``."""
    return float(np.exp(log_partition_function(ref, rewards, beta)))


def optimal_policy(
    ref: EnumeratedDistribution, rewards: SequenceRewards, beta: float
) -> EnumeratedDistribution:
    """The exponentially tilted reference ``ref * exp(R / beta) / Z``."""
    tilted = ref.log_probs + _rewards_array(ref, rewards) / beta
    return EnumeratedDistribution(ref.sequences, tilted - logsumexp(tilted))


def hallucination_prob(dist: EnumeratedDistribution, spec: HallucinationSpec) -> float:
    """Mass of sequences with a hallucinated token and no exempt token."""
    mask = dist.contains_mask(spec.hallucinated_tokens) & ~dist.contains_mask(spec.exempt_tokens)
    return min(dist.mass_where(mask), 1.0)


def penalty_rewards(lex: ConceptLexicon, lambda1: float) -> Callable[[np.ndarray], np.ndarray]:
    penalized = np.fromiter(lex.penalized, dtype=np.int64) if lex.penalized else None

    def rewards(sequences: np.ndarray) -> np.ndarray:
        if penalized is None:
            return np.zeros(sequences.shape[0])
        return -lambda1 * np.isin(sequences, penalized).sum(axis=1)

    return rewards


def composite_rewards(
    lex: ConceptLexicon, lambda1: float, lambda2: float
) -> Callable[[np.ndarray], np.ndarray]:
    pen = penalty_rewards(lex, lambda1)
    hyper = np.fromiter(lex.forget_hypernyms, dtype=np.int64) if lex.forget_hypernyms else None

    def rewards(sequences: np.ndarray) -> np.ndarray:
        bonus = 0.0 if hyper is None else lambda2 * np.isin(sequences, hyper).any(axis=1)
        return pen(sequences) + bonus

    return rewards


@dataclass(frozen=True)
class TiltedMasses:
    """Log-domain sums under the penalty-only and composite tilts."""

    log_z_pen: float
    log_z_comp: float
    log_hallu_pen: float
    log_hallu_comp: float
    hallu_ref: float
    hyper_ref: float
    pointwise: Optional[bool]


def _enumerated_masses(
    dist: EnumeratedDistribution,
    lex: ConceptLexicon,
    spec: HallucinationSpec,
    lambda1: float,
    lambda2: float,
    beta: float,
) -> TiltedMasses:
    r_pen = penalty_rewards(lex, lambda1)(dist.sequences)
    has_hyper = dist.contains_mask(lex.forget_hypernyms)
    r_comp = r_pen + lambda2 * has_hyper
    lp_pen = dist.log_probs + r_pen / beta
    lp_comp = dist.log_probs + r_comp / beta
    log_z_pen = float(logsumexp(lp_pen))
    log_z_comp = float(logsumexp(lp_comp))
    hallu = dist.contains_mask(spec.hallucinated_tokens) & ~dist.contains_mask(spec.exempt_tokens)
    if hallu.any():
        log_h_pen = float(logsumexp(lp_pen[hallu]))
        log_h_comp = float(logsumexp(lp_comp[hallu]))
        pointwise = bool(np.all(lp_comp[hallu] - log_z_comp < lp_pen[hallu] - log_z_pen))
    else:
        log_h_pen = log_h_comp = -np.inf
        pointwise = None
    return TiltedMasses(
        log_z_pen,
        log_z_comp,
        log_h_pen,
        log_h_comp,
        dist.mass_where(hallu),
        dist.mass_where(has_hyper),
        pointwise,
    )


def flagged_forward(
    log_rows: np.ndarray,
    next_state: np.ndarray,
    length: int,
    token_weights: np.ndarray,
    flag_sets: tuple[AbstractSet[int], ...],
) -> np.ndarray:
    """Log-mass of complete sequences split by which token sets they touched.

    Args:
        log_rows: (states, tokens) log-probabilities.
        next_state: Transition table of the policy.
        length: Sequence length.
        token_weights: Per-token log-weight added on emission.
        flag_sets: Token sets to track; result axis ``k`` is 1 when set ``k``
            was emitted at least once.

    Returns:
        Array of shape ``(2,) * len(flag_sets)``.
    """
    n_states, vocab_size = log_rows.shape
    n_flags = len(flag_sets)
    n_combos = 2**n_flags
    hits = np.zeros(vocab_size, dtype=np.int64)
    for k, tokens in enumerate(flag_sets):
        for t in tokens:
            hits[t] |= 1 << k
    weights = log_rows + token_weights[None, :]

    alive = np.full((n_states, n_combos), -np.inf)
    alive[BOS_ID, 0] = 0.0
    valid = next_state >= 0
    valid[:, BOS_ID] = False
    s_idx, w_idx = np.nonzero(valid)
    final = np.full(n_combos, -np.inf)
    for t in range(length):
        last = t == length - 1
        nxt = np.full((n_states, n_combos), -np.inf)
        for combo in range(n_combos):
            mass = alive[:, combo]
            if not np.isfinite(mass).any():
                continue
            contrib = mass[:, None] + weights
            new_combo = combo | hits
            if last:
                cols = np.arange(1, vocab_size)
                vals = contrib[:, cols]
                np.logaddexp.at(final, np.broadcast_to(new_combo[cols], vals.shape), vals)
            else:
                np.logaddexp.at(
                    nxt,
                    (next_state[s_idx, w_idx], new_combo[w_idx]),
                    contrib[s_idx, w_idx],
                )
        alive = nxt
    return final.reshape((2,) * n_flags, order="F")


def _recursive_masses(
    policy: TabularPolicy,
    condition: str,
    lex: ConceptLexicon,
    spec: HallucinationSpec,
    lambda1: float,
    lambda2: float,
    beta: float,
) -> TiltedMasses:
    rows = policy.rows(condition)
    flags = (lex.forget_hypernyms, spec.hallucinated_tokens, spec.exempt_tokens)
    penalty = np.zeros(policy.vocab_size)
    penalty[sorted(lex.penalized)] = -lambda1 / beta
    tilted = flagged_forward(rows, policy.next_state, policy.length, penalty, flags)
    plain = flagged_forward(rows, policy.next_state, policy.length, np.zeros_like(penalty), flags)

    # axes: [hyper][hallucinated][exempt]
    log_z_pen = float(logsumexp(tilted))
    log_z_comp = float(
        np.logaddexp(logsumexp(tilted[0]), logsumexp(tilted[1]) + lambda2 / beta)
    )
    # exempt covers the hypernyms, so hallucinated sequences sit at [0, 1, 0]
    log_h = float(tilted[0, 1, 0])
    return TiltedMasses(
        log_z_pen,
        log_z_comp,
        log_h,
        log_h,
        float(np.exp(plain[:, 1, 0]).sum()),
        float(np.exp(logsumexp(plain[1]))),
        None,
    )


def tilted_masses(
    ref: Union[TabularPolicy, EnumeratedDistribution],
    condition: str,
    lex: ConceptLexicon,
    spec: HallucinationSpec,
    lambda1: float,
    lambda2: float,
    beta: float,
    *,
    cap: int = DEFAULT_ENUMERATION_CAP,
    method: Literal["auto", "enumeration", "recursion"] = "auto",
) -> tuple[TiltedMasses, str]:
    """Partition sums and hallucinated sums for both rewards.

    Returns the masses and the method used. ``spec`` is taken as given, so
    callers add the hypernym exemptions themselves.
    """
    if isinstance(ref, EnumeratedDistribution):
        return _enumerated_masses(ref, lex, spec, lambda1, lambda2, beta), "enumeration"
    chosen = method
    if method == "auto":
        chosen = "recursion" if (ref.vocab_size - 1) ** ref.length > cap else "enumeration"
    if chosen == "enumeration":
        dist = enumerate_distribution(ref, condition, cap)
        return _enumerated_masses(dist, lex, spec, lambda1, lambda2, beta), chosen
    if chosen == "recursion":
        return _recursive_masses(ref, condition, lex, spec, lambda1, lambda2, beta), chosen
    raise ValueError(f"Unknown lemma method: {method}")


def verify_lemma1(
    ref: Union[TabularPolicy, EnumeratedDistribution],
    condition: str,
    lex: ConceptLexicon,
    hallu_spec: HallucinationSpec,
    lambda1: float,
    lambda2: float,
    beta: float,
    *,
    cap: int = DEFAULT_ENUMERATION_CAP,
    seed: Optional[int] = None,
    method: Literal["auto", "enumeration", "recursion"] = "auto",
) -> LemmaReport:
    """Compare the penalty-only and composite optima of ``ref``.

    Hypernyms of the forgotten concept are added to the exemptions of ``hallu_spec``.
    Policies whose sequence space exceeds ``cap`` go through
    :func:`flagged_forward` instead of enumeration.

    Raises:
        ValueError: a weight or beta is not positive.
        PreconditionViolated: the reference puts no mass on hypernym-bearing
            or on hallucinated sequences, or ``hallu_spec`` marks a hypernym as
            hallucinated. The computed report is attached.
    """
    if lambda1 <= 0 or lambda2 <= 0 or beta <= 0:
        raise ValueError("lambda1, lambda2 and beta must all be positive")
    spec = hallu_spec.with_exemptions(lex.forget_hypernyms)
    if spec.hallucinated_tokens & lex.forget_hypernyms:
        raise PreconditionViolated("hypernyms of the forgotten concept cannot be hallucinations")

    masses, chosen = tilted_masses(
        ref, condition, lex, spec, lambda1, lambda2, beta, cap=cap, method=method
    )
    if isinstance(ref, EnumeratedDistribution):
        vocab_size, length = lex.vocab.size, ref.length
    else:
        vocab_size, length = ref.vocab_size, ref.length

    p_pen = float(np.exp(masses.log_hallu_pen - masses.log_z_pen))
    p_comp = float(np.exp(masses.log_hallu_comp - masses.log_z_comp))
    verdict = masses.log_z_comp > masses.log_z_pen and p_comp < p_pen
    report = LemmaReport(
        condition=condition,
        instance=InstanceDescriptor(
            vocab_size=vocab_size,
            length=length,
            beta=beta,
            lambda1=lambda1,
            lambda2=lambda2,
            seed=seed,
        ),
        method=chosen,
        log_z_pen=masses.log_z_pen,
        log_z_comp=masses.log_z_comp,
        z_pen=float(np.exp(masses.log_z_pen)),
        z_comp=float(np.exp(masses.log_z_comp)),
        p_hallu_ref=masses.hallu_ref,
        p_hallu_pen=p_pen,
        p_hallu_comp=p_comp,
        hypernym_mass=masses.hyper_ref,
        pointwise=masses.pointwise,
        verdict=verdict,
    )
    if masses.hyper_ref <= 0:
        raise PreconditionViolated(
            f"reference puts no mass on hypernym-bearing sequences for {condition!r}", report
        )
    if not np.isfinite(masses.log_hallu_pen):
        raise PreconditionViolated(
            f"reference puts no mass on hallucinated sequences for {condition!r}", report
        )
    logger.debug(
        f"Lemma check {condition}: P_pen={p_pen:.6g} P_comp={p_comp:.6g} verdict={verdict}"
    )
    return report

