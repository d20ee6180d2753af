"""Maximum-likelihood fitting of a tabular policy to a caption corpus."""

import logging
from typing import Callable

import numpy as np

from rlunlearn.environment.corpus import CaptionRecord, Corpus
from rlunlearn.errors import EmptyCorpus
from rlunlearn.policy.tabular import TabularPolicy, visited_states

logger = logging.getLogger(__name__)

ConditionOf = Callable[[CaptionRecord], str]


def transition_counts(
    policy: TabularPolicy, corpus: Corpus, condition_of: ConditionOf
) -> np.ndarray:
    """Count (condition, state, token) transitions over the corpus."""
    counts = np.zeros(policy.logits.shape)
    for record in corpus:
        c = policy.condition_index(condition_of(record))
        states = visited_states(policy, record.tokens)
        np.add.at(counts[c], (states, np.asarray(record.tokens)), 1.0)
    return counts


def _mean_nll(log_probs: np.ndarray, counts: np.ndarray, n_records: int) -> float:
    mask = counts > 0
    return float(-(counts[mask] * log_probs[mask]).sum() / n_records)


def fit_mle(
    policy: TabularPolicy,
    corpus: Corpus,
    lr: float,
    epochs: int,
    *,
    condition_of: ConditionOf,
) -> tuple[TabularPolicy, list[float]]:
    """Full-batch gradient ascent on the mean sequence log-likelihood.

    The count tensor is fixed across epochs, so each step costs one softmax
    over the logit table.

    Args:
        policy: Starting point; left untouched.
        corpus: Caption records.
        lr: Step size.
        epochs: Number of full-batch steps.
        condition_of: Maps a record to the policy condition it trains.

    Returns:
        (fitted policy, mean NLL before each step followed by the final NLL).

    Raises:
        EmptyCorpus: the corpus has no records.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot fit a policy to an empty corpus")
    if lr <= 0:
        raise ValueError("lr must be positive")
    n = len(corpus)
    counts = transition_counts(policy, corpus, condition_of)
    row_totals = counts.sum(axis=-1, keepdims=True)

    current = policy
    trace = []
    for epoch in range(epochs):
        log_probs = current.log_prob_table()
        trace.append(_mean_nll(log_probs, counts, n))
        grad = (counts - row_totals * np.exp(log_probs)) / n
        current = current.with_logits(current.logits + lr * grad)
        if epoch % 100 == 0:
            logger.debug(f"MLE epoch {epoch}: nll={trace[-1]:.6f}")
    trace.append(_mean_nll(current.log_prob_table(), counts, n))
    logger.info(f"MLE fit: {epochs} epochs, nll {trace[0]:.4f} -> {trace[-1]:.4f}")
    return current, trace
