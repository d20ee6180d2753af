"""Randomized and parametric checks of the closed-form hallucination bound."""

import logging
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from rlunlearn.concepts.lexicon import ConceptLexicon, LexiconSpec, build_lexicon
from rlunlearn.errors import PreconditionViolated
from rlunlearn.oracle.closed_form import (
    HallucinationSpec,
    LemmaReport,
    hallucination_spec_for,
    tilted_masses,
    verify_lemma1,
)
from rlunlearn.policy.distribution import EnumeratedDistribution
from rlunlearn.policy.tabular import DEFAULT_ENUMERATION_CAP, TabularPolicy, init_policy
from rlunlearn.telemetry.tracer import trace_operation
from rlunlearn.utils.seeding import derive_rng
from rlunlearn.workers.pool import WorkerPool

logger = logging.getLogger(__name__)

RANDOM_CONDITION = "x"


class LemmaSummary(BaseModel):
    """Aggregate over a batch of random instances."""

    instances: int
    holds: int
    precondition_failures: int
    min_z_margin: Optional[float] = None
    min_p_margin: Optional[float] = None

    @property
    def checked(self) -> int:
        return self.instances - self.precondition_failures

    @property
    def all_hold(self) -> bool:
        return self.holds == self.checked

    def line(self) -> str:
        return f"{self.holds}/{self.checked} instances hold"


class LambdaPoint(BaseModel):
    lambda2: float = Field(ge=0.0)
    log_z: float
    p_hallu: float


def random_instance(
    seed: int, index: int, max_vocab: int = 10, max_length: int = 3
) -> tuple[ConceptLexicon, TabularPolicy, HallucinationSpec, float, float]:
    """A random lexicon, reference policy, spec and reward weights.

    The vocabulary has at most ``max_vocab`` entries including the marker.
    Forget keywords, their hypernyms and their synonyms come in random
    numbers; there is always at least one forget keyword, one hypernym and
    one retain word. Leftover words are retain words or plain fillers.
    """
    if max_vocab < 4:
        raise ValueError("max_vocab must leave room for three emittable tokens")
    rng = derive_rng(seed, "lemma", index)
    n_emit = int(rng.integers(3, max_vocab))
    length = int(rng.integers(1, max_length + 1))
    names = [f"t{i}" for i in range(1, n_emit + 1)]
    order = [names[i] for i in rng.permutation(n_emit)]

    n_forget = int(rng.integers(1, n_emit - 1))
    n_hyper = int(rng.integers(1, n_emit - n_forget))
    n_syn = int(rng.integers(0, n_emit - n_forget - n_hyper))
    forget = order[:n_forget]
    hyper = order[n_forget : n_forget + n_hyper]
    syn = order[n_forget + n_hyper : n_forget + n_hyper + n_syn]
    rest = order[n_forget + n_hyper + n_syn :]
    retain = rest[:1] + [name for name in rest[1:] if rng.random() < 0.5]

    synonyms: dict[str, list[str]] = {}
    hypernyms: dict[str, list[str]] = {}
    for group, words in ((synonyms, syn), (hypernyms, hyper)):
        for name in words:
            group.setdefault(forget[int(rng.integers(n_forget))], []).append(name)
    spec = LexiconSpec(
        vocabulary=names,
        forget=forget,
        synonyms=synonyms,
        hypernyms=hypernyms,
        retain=retain,
    )
    lex = build_lexicon(spec)
    history = "full" if length <= 3 and rng.random() < 0.5 else "markov"
    ref = init_policy(
        lex.vocab,
        [RANDOM_CONDITION],
        length,
        float(rng.uniform(0.5, 3.0)),
        rng,
        history,
    )
    lambda1 = float(rng.uniform(0.1, 2.0))
    lambda2 = float(rng.uniform(0.1, 2.0))
    return lex, ref, hallucination_spec_for(lex, lex.forget_keywords), lambda1, lambda2


def _check_instance(seed: int, index: int, beta: float, max_vocab: int, max_length: int):
    lex, ref, spec, lambda1, lambda2 = random_instance(seed, index, max_vocab, max_length)
    try:
        return verify_lemma1(
            ref, RANDOM_CONDITION, lex, spec, lambda1, lambda2, beta, seed=index
        )
    except PreconditionViolated as e:
        logger.debug(f"Instance {index} skipped: {e}")
        return None


def summarize(reports: Sequence[Optional[LemmaReport]]) -> LemmaSummary:
    checked = [r for r in reports if r is not None]
    return LemmaSummary(
        instances=len(reports),
        holds=sum(1 for r in checked if r.verdict),
        precondition_failures=len(reports) - len(checked),
        min_z_margin=min((r.z_margin for r in checked), default=None),
        min_p_margin=min((r.p_margin for r in checked), default=None),
    )


def lemma_sweep(
    n: int,
    seed: int,
    *,
    beta: float = 1.0,
    max_vocab: int = 10,
    max_length: int = 3,
    pool: Optional[WorkerPool] = None,
) -> tuple[list[Optional[LemmaReport]], LemmaSummary]:
    """Check the bound on ``n`` random instances.

    Instance ``i`` is seeded from ``(seed, i)`` alone, so results do not
    depend on the pool. Instances failing the precondition come back as None.
    """
    indices = range(n)

    def check(index: int) -> Optional[LemmaReport]:
        return _check_instance(seed, index, beta, max_vocab, max_length)

    with trace_operation("lemma.sweep", {"instances": n, "seed": str(seed)}):
        reports = pool.map(check, indices) if pool is not None else [check(i) for i in indices]
    summary = summarize(reports)
    logger.info(f"Lemma sweep: {summary.line()} ({summary.precondition_failures} skipped)")
    return reports, summary


def lambda_sweep(
    ref: Union[TabularPolicy, EnumeratedDistribution],
    condition: str,
    lex: ConceptLexicon,
    hallu_spec: HallucinationSpec,
    lambda1: float,
    grid: Sequence[float],
    beta: float,
    *,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[LambdaPoint]:
    """Hallucination probability of the composite optimum along ``grid``.

    ``lambda2 = 0`` is the penalty-only optimum; the curve is non-increasing.
    """
    spec = hallu_spec.with_exemptions(lex.forget_hypernyms)
    points = []
    for lambda2 in sorted(grid):
        masses, _ = tilted_masses(ref, condition, lex, spec, lambda1, lambda2, beta, cap=cap)
        points.append(
            LambdaPoint(
                lambda2=lambda2,
                log_z=masses.log_z_comp,
                p_hallu=float(np.exp(masses.log_hallu_comp - masses.log_z_comp)),
            )
        )
    return points
