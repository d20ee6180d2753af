"""Tests for maximum-likelihood fitting."""

import numpy as np
import pytest

from rlunlearn.concepts.lexicon import Vocabulary
from rlunlearn.environment.corpus import CaptionRecord, Corpus
from rlunlearn.errors import EmptyCorpus
from rlunlearn.policy.mle import fit_mle, transition_counts
from rlunlearn.policy.tabular import init_policy, log_prob
from rlunlearn.utils.seeding import derive_rng

VOCAB = Vocabulary.from_names(["a", "b", "c", "d"])


def _condition(record):
    return "x"


def _policy():
    return init_policy(VOCAB, ["x"], 2, 0.0, derive_rng(0, "p"))


def test_repeated_sequence_is_learned():
    corpus = Corpus(tuple(CaptionRecord(0, 0, (2, 3)) for _ in range(10)), 2)
    fitted, trace = fit_mle(_policy(), corpus, lr=5.0, epochs=300, condition_of=_condition)
    assert np.exp(log_prob(fitted, "x", (2, 3))) > 0.99
    assert trace[-1] < trace[0]
    assert len(trace) == 301


def test_nll_is_non_increasing():
    corpus = Corpus(
        (CaptionRecord(0, 0, (1, 2)), CaptionRecord(0, 0, (1, 3)), CaptionRecord(0, 0, (4, 4))), 2
    )
    _, trace = fit_mle(_policy(), corpus, lr=1.0, epochs=50, condition_of=_condition)
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_zero_epochs_leaves_policy_unchanged():
    policy = _policy()
    corpus = Corpus((CaptionRecord(0, 0, (1, 2)),), 2)
    fitted, trace = fit_mle(policy, corpus, lr=1.0, epochs=0, condition_of=_condition)
    np.testing.assert_array_equal(fitted.logits, policy.logits)
    assert len(trace) == 1


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        fit_mle(_policy(), Corpus((), 2), lr=1.0, epochs=5, condition_of=_condition)


def test_non_positive_lr():
    corpus = Corpus((CaptionRecord(0, 0, (1, 2)),), 2)
    with pytest.raises(ValueError, match="lr"):
        fit_mle(_policy(), corpus, lr=0.0, epochs=5, condition_of=_condition)


def test_transition_counts():
    corpus = Corpus((CaptionRecord(0, 0, (1, 2)), CaptionRecord(0, 0, (1, 3))), 2)
    counts = transition_counts(_policy(), corpus, _condition)
    assert counts[0, 0, 1] == 2.0
    assert counts[0, 1, 2] == 1.0
    assert counts[0, 1, 3] == 1.0
    assert counts.sum() == 4.0
