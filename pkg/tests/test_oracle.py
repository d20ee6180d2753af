"""Tests for the closed-form optima and the hallucination-reduction check."""

import math

import numpy as np
import pytest

from rlunlearn.errors import DisjointnessViolation, PreconditionViolated
from rlunlearn.oracle.closed_form import (
    HallucinationSpec,
    hallucination_prob,
    hallucination_spec_for,
    log_partition_function,
    optimal_policy,
    partition_function,
    tilted_masses,
    verify_lemma1,
)
from rlunlearn.oracle.sweep import random_instance
from rlunlearn.pipeline.acceptance import minimal_instance
from rlunlearn.policy.distribution import EnumeratedDistribution


def test_minimal_instance_values():
    lex, ref, spec = minimal_instance()
    report = verify_lemma1(ref, "x", lex, spec, 1.0, 1.0, 1.0)
    assert report.method == "enumeration"
    assert report.z_pen == pytest.approx((math.exp(-1) + 2) / 3, abs=1e-12)
    assert report.z_comp == pytest.approx((math.exp(-1) + math.e + 1) / 3, abs=1e-12)
    assert report.p_hallu_pen == pytest.approx(1 / (math.exp(-1) + 2), abs=1e-12)
    assert report.p_hallu_comp == pytest.approx(1 / (math.exp(-1) + math.e + 1), abs=1e-12)
    assert report.p_hallu_ref == pytest.approx(1 / 3)
    assert report.hypernym_mass == pytest.approx(1 / 3)
    assert report.pointwise is True
    assert report.verdict is True
    assert report.z_margin > 0
    assert report.p_margin > 0


def test_zero_reward_partition_function_is_one():
    _, ref, _ = minimal_instance()
    assert partition_function(ref, np.zeros(ref.size), 0.7) == pytest.approx(1.0)
    assert log_partition_function(ref, lambda s: np.zeros(s.shape[0]), 2.0) == pytest.approx(0.0)


def test_partition_function_rejects_non_positive_beta():
    _, ref, _ = minimal_instance()
    with pytest.raises(ValueError, match="beta"):
        partition_function(ref, np.zeros(ref.size), 0.0)


def test_reward_shape_is_checked():
    _, ref, _ = minimal_instance()
    with pytest.raises(ValueError, match="shape"):
        partition_function(ref, np.zeros(ref.size + 1), 1.0)


def test_beta_limits():
    """Large beta keeps the reference; small beta puts all mass on the best sequence."""
    _, ref, _ = minimal_instance()
    rewards = np.array([0.0, 1.0, 0.0])
    loose = optimal_policy(ref, rewards, 1e4)
    np.testing.assert_allclose(loose.probs, ref.probs, atol=1e-4)
    sharp = optimal_policy(ref, rewards, 1e-3)
    assert sharp.probs[1] == pytest.approx(1.0)
    assert sharp.total_mass() == pytest.approx(1.0)


def test_hallucination_probability_of_uniform_reference():
    _, ref, spec = minimal_instance()
    assert hallucination_prob(ref, spec) == pytest.approx(1 / 3)
    assert hallucination_prob(ref, spec.with_exemptions({3})) == 0.0


def test_zero_hypernym_mass_violates_precondition():
    lex, _, spec = minimal_instance()
    ref = EnumeratedDistribution.from_mapping({(1,): 0.5, (2,): 0.0, (3,): 0.5})
    with pytest.raises(PreconditionViolated, match="hypernym") as exc:
        verify_lemma1(ref, "x", lex, spec, 1.0, 1.0, 1.0)
    assert exc.value.report is not None
    assert exc.value.report.hypernym_mass == 0.0


def test_zero_hallucination_mass_violates_precondition():
    lex, _, spec = minimal_instance()
    ref = EnumeratedDistribution.from_mapping({(1,): 0.5, (2,): 0.5, (3,): 0.0})
    with pytest.raises(PreconditionViolated, match="hallucinated"):
        verify_lemma1(ref, "x", lex, spec, 1.0, 1.0, 1.0)


def test_hypernym_cannot_be_a_hallucination():
    lex, ref, _ = minimal_instance()
    animal = lex.vocab.id_of("animal")
    with pytest.raises(PreconditionViolated):
        verify_lemma1(ref, "x", lex, HallucinationSpec(frozenset({animal})), 1.0, 1.0, 1.0)


@pytest.mark.parametrize("lambda1,lambda2,beta", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1, 1, 0)])
def test_weights_must_be_positive(lambda1, lambda2, beta):
    lex, ref, spec = minimal_instance()
    with pytest.raises(ValueError):
        verify_lemma1(ref, "x", lex, spec, lambda1, lambda2, beta)


def test_spec_must_be_disjoint_from_grounded_objects():
    with pytest.raises(DisjointnessViolation):
        HallucinationSpec(frozenset({1, 2}), frozenset({2}))


def test_spec_from_lexicon(lex):
    v = lex.vocab
    spec = hallucination_spec_for(lex, {v.id_of("dog")})
    assert v.id_of("cat") in spec.hallucinated_tokens
    assert v.id_of("puppy") not in spec.hallucinated_tokens
    assert v.id_of("dog") not in spec.hallucinated_tokens
    assert spec.exempt_tokens == lex.forget_hypernyms


@pytest.mark.parametrize("index", range(12))
def test_recursion_agrees_with_enumeration(index):
    lex, ref, spec, lambda1, lambda2 = random_instance(17, index)
    spec = spec.with_exemptions(lex.forget_hypernyms)
    enum, m1 = tilted_masses(ref, "x", lex, spec, lambda1, lambda2, 0.8, method="enumeration")
    rec, m2 = tilted_masses(ref, "x", lex, spec, lambda1, lambda2, 0.8, method="recursion")
    assert (m1, m2) == ("enumeration", "recursion")
    assert rec.log_z_pen == pytest.approx(enum.log_z_pen, rel=1e-9, abs=1e-12)
    assert rec.log_z_comp == pytest.approx(enum.log_z_comp, rel=1e-9, abs=1e-12)
    assert rec.hallu_ref == pytest.approx(enum.hallu_ref, abs=1e-12)
    assert rec.hyper_ref == pytest.approx(enum.hyper_ref, abs=1e-12)
    if np.isfinite(enum.log_hallu_pen):
        assert rec.log_hallu_pen == pytest.approx(enum.log_hallu_pen, rel=1e-9, abs=1e-12)
        assert rec.log_hallu_comp == pytest.approx(enum.log_hallu_comp, rel=1e-9, abs=1e-12)
    else:
        assert not np.isfinite(rec.log_hallu_pen)


def test_auto_method_switches_on_cap():
    lex, ref, spec, lambda1, lambda2 = random_instance(17, 0)
    report = verify_lemma1(ref, "x", lex, spec, lambda1, lambda2, 1.0, cap=1)
    assert report.method == "recursion"
    assert report.pointwise is None
    full = verify_lemma1(ref, "x", lex, spec, lambda1, lambda2, 1.0)
    assert full.method == "enumeration"
    assert report.p_hallu_comp == pytest.approx(full.p_hallu_comp, rel=1e-9)
