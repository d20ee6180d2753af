"""Tests for the tabular policy: sampling, probabilities, KL and containment."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from rlunlearn.concepts.lexicon import Vocabulary
from rlunlearn.errors import EnumerationTooLarge, InvalidSequence, SupportMismatch
from rlunlearn.policy.distribution import EnumeratedDistribution, distribution_kl
from rlunlearn.policy.tabular import (
    TabularPolicy,
    containment_probability,
    enumerate_distribution,
    init_policy,
    kl_and_gradient,
    kl_divergence,
    log_prob,
    sample,
    sample_batch,
    sequence_kl,
    transition_table,
)
from rlunlearn.utils.seeding import derive_rng

VOCAB = Vocabulary.from_names(["a", "b", "c", "d"])


def _uniform(length=2, history="markov"):
    return init_policy(VOCAB, ["x"], length, 0.0, derive_rng(0, "p"), history)


def _random(seed, length=2, history="markov", conditions=("x", "y")):
    return init_policy(VOCAB, list(conditions), length, 2.0, derive_rng(seed, "p"), history)


def test_uniform_init_spreads_mass_evenly():
    policy = _uniform()
    probs = np.exp(policy.rows("x"))
    assert policy.vocab_size == 5
    np.testing.assert_allclose(probs[:, 1:], 0.25)
    assert np.all(probs[:, 0] == 0.0)


def test_uniform_sequence_log_prob():
    policy = _uniform()
    assert log_prob(policy, "x", (1, 3)) == pytest.approx(math.log(1 / 16))


def test_samples_never_emit_marker():
    seqs = sample_batch(_random(1), "x", derive_rng(1, "s"), 500)
    assert seqs.shape == (500, 2)
    assert seqs.min() >= 1
    assert seqs.max() <= 4


def test_uniform_sampling_chi_square():
    """16000 draws over the 16 sequences are consistent with uniform."""
    seqs = sample_batch(_uniform(), "x", derive_rng(2, "s"), 16000)
    codes = (seqs[:, 0] - 1) * 4 + (seqs[:, 1] - 1)
    counts = np.bincount(codes, minlength=16)
    assert chisquare(counts).pvalue > 1e-3


def test_sampling_matches_enumerated_probabilities():
    policy = _random(3)
    n = 20000
    seqs = sample_batch(policy, "y", derive_rng(3, "s"), n)
    dist = enumerate_distribution(policy, "y")
    index = {tuple(s): i for i, s in enumerate(dist.as_dict())}
    counts = np.zeros(dist.size)
    for s in map(tuple, seqs.tolist()):
        counts[index[s]] += 1
    assert chisquare(counts, dist.probs * n).pvalue > 1e-3


def test_sample_is_seeded():
    policy = _random(4)
    assert sample(policy, "x", derive_rng(5, "s")) == sample(policy, "x", derive_rng(5, "s"))


def test_marker_has_zero_probability():
    with pytest.raises(InvalidSequence, match="marker"):
        log_prob(_uniform(), "x", (0, 1))


def test_wrong_length_is_rejected():
    with pytest.raises(InvalidSequence, match="length"):
        log_prob(_uniform(), "x", (1, 2, 3))


def test_enumeration_sums_to_one():
    for history in ("markov", "full"):
        dist = enumerate_distribution(_random(6, 3, history), "x")
        assert dist.size == 64
        assert dist.total_mass() == pytest.approx(1.0)


def test_enumeration_cap():
    with pytest.raises(EnumerationTooLarge) as exc:
        enumerate_distribution(_random(6, 3), "x", cap=10)
    assert exc.value.size == 64


def test_kl_of_two_point_distributions():
    p = EnumeratedDistribution.from_mapping({(1,): 0.9, (2,): 0.1})
    q = EnumeratedDistribution.from_mapping({(1,): 0.5, (2,): 0.5})
    expected = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
    assert distribution_kl(p, q) == pytest.approx(expected)
    assert expected == pytest.approx(0.368, abs=1e-3)


def test_kl_of_policies_matches_two_point_value():
    vocab = Vocabulary.from_names(["a", "b"])
    logits = np.zeros((1, 3, 3))
    logits[0, :, 1] = math.log(9.0)
    p = TabularPolicy(vocab, ["x"], 1, logits)
    q = TabularPolicy(vocab, ["x"], 1, np.zeros((1, 3, 3)))
    assert kl_divergence(p, q, "x") == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2))


def test_kl_support_mismatch():
    p = EnumeratedDistribution.from_mapping({(1,): 0.5, (2,): 0.5})
    q = EnumeratedDistribution.from_mapping({(1,): 1.0, (2,): 0.0})
    with pytest.raises(SupportMismatch):
        distribution_kl(p, q)
    assert distribution_kl(q, p) == pytest.approx(math.log(2.0))


@pytest.mark.parametrize("history,length", [("markov", 1), ("markov", 3), ("full", 2), ("full", 3)])
def test_dynamic_programming_matches_enumeration(history, length):
    p = _random(7, length, history)
    q = _random(8, length, history)
    for condition in p.conditions:
        assert sequence_kl(p, q, condition) == pytest.approx(
            kl_divergence(p, q, condition), abs=1e-12
        )
        dist = enumerate_distribution(p, condition)
        for tokens in ({1}, {2, 4}, set()):
            expected = dist.mass_where(dist.contains_mask(tokens))
            assert containment_probability(p, condition, tokens) == pytest.approx(
                expected, abs=1e-12
            )


def test_kl_to_self_is_zero():
    p = _random(9, 3)
    assert sequence_kl(p, p, "x") == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("history", ["markov", "full"])
def test_kl_gradient_matches_finite_differences(history):
    p = _random(10, 2, history)
    q = _random(11, 2, history)
    _, grad = kl_and_gradient(p, q, "y")
    c = p.condition_index("y")
    h = 1e-6
    rng = derive_rng(12, "coords")
    for _ in range(15):
        s, v = int(rng.integers(p.n_states)), int(rng.integers(1, p.vocab_size))
        bumped = p.logits.copy()
        bumped[c, s, v] += h
        up = sequence_kl(p.with_logits(bumped), q, "y")
        bumped[c, s, v] -= 2 * h
        down = sequence_kl(p.with_logits(bumped), q, "y")
        assert grad[s, v] == pytest.approx((up - down) / (2 * h), abs=1e-7)


def test_policies_must_share_space():
    with pytest.raises(ValueError, match="share"):
        sequence_kl(_random(1, 2), _random(1, 3), "x")


def test_transition_tables():
    markov = transition_table(5, 3, "markov")
    assert markov.shape == (5, 5)
    assert markov[2, 3] == 3
    assert markov[2, 0] == -1
    full = transition_table(5, 2, "full")
    assert full.shape == (5, 5)
    assert list(full[0, 1:]) == [1, 2, 3, 4]
    assert np.all(full[1:, :] == -1)
    with pytest.raises(ValueError):
        transition_table(5, 4, "full")


def test_policy_is_immutable():
    policy = _random(13)
    with pytest.raises(ValueError):
        policy.logits[0, 0, 1] = 5.0


def test_temperature():
    policy = _uniform()
    with pytest.raises(ValueError, match="temperature"):
        policy.log_prob_table(0.0)
    logits = np.zeros(policy.logits.shape)
    logits[0, 0, 2] = 1.0
    sharp = np.exp(policy.with_logits(logits).rows("x", temperature=0.1))
    assert sharp[0].max() > 0.99


def test_init_rejects_negative_scale():
    with pytest.raises(ValueError):
        init_policy(VOCAB, ["x"], 2, -1.0, derive_rng(0, "p"))


def test_unknown_condition():
    with pytest.raises(ValueError, match="Unknown policy condition"):
        _uniform().rows("nope")
