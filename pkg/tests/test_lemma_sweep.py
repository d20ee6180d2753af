"""Tests for the randomized and lambda sweeps of the hallucination bound."""

import pytest

from rlunlearn.oracle.closed_form import verify_lemma1
from rlunlearn.oracle.sweep import LemmaSummary, lambda_sweep, lemma_sweep, random_instance
from rlunlearn.pipeline.acceptance import minimal_instance
from rlunlearn.workers.pool import WorkerPool


def test_bound_holds_on_random_instances():
    reports, summary = lemma_sweep(40, seed=3)
    assert len(reports) == 40
    assert summary.checked > 0
    assert summary.all_hold
    assert summary.min_z_margin > 0
    assert summary.min_p_margin > 0
    assert summary.line() == f"{summary.holds}/{summary.checked} instances hold"


def test_sweep_is_independent_of_the_pool():
    plain, _ = lemma_sweep(10, seed=4)
    with WorkerPool(3) as pool:
        pooled, _ = lemma_sweep(10, seed=4, pool=pool)
    assert [r and r.model_dump() for r in plain] == [r and r.model_dump() for r in pooled]


def test_random_instance_shape():
    for index in range(20):
        lex, ref, spec, lambda1, lambda2 = random_instance(5, index, max_vocab=6, max_length=2)
        assert 4 <= ref.vocab_size <= 6
        assert 1 <= ref.length <= 2
        assert lex.forget_keywords
        assert lex.forget_hypernyms
        assert lex.retain_keywords
        assert not lex.forget_keywords & lex.forget_hypernyms
        assert spec.hallucinated_tokens
        assert 0.1 <= lambda1 <= 2.0 and 0.1 <= lambda2 <= 2.0


def test_random_instance_varies_set_sizes():
    lexicons = [random_instance(6, index)[0] for index in range(60)]
    assert max(len(lex.forget_keywords) for lex in lexicons) > 1
    assert max(len(lex.forget_hypernyms) for lex in lexicons) > 1
    assert max(len(lex.forget_synonyms) for lex in lexicons) > 0


def test_random_instance_rejects_tiny_vocab():
    with pytest.raises(ValueError):
        random_instance(0, 0, max_vocab=3)


def test_summary_of_empty_sweep():
    _, summary = lemma_sweep(0, seed=1)
    assert summary == LemmaSummary(instances=0, holds=0, precondition_failures=0)
    assert summary.all_hold


def test_lambda_sweep_is_non_increasing():
    lex, ref, spec = minimal_instance()
    points = lambda_sweep(ref, "x", lex, spec, 1.0, [2.0, 0.0, 1.0, 0.5, 4.0], 1.0)
    assert [p.lambda2 for p in points] == [0.0, 0.5, 1.0, 2.0, 4.0]
    values = [p.p_hallu for p in points]
    assert all(b < a for a, b in zip(values, values[1:]))
    report = verify_lemma1(ref, "x", lex, spec, 1.0, 1.0, 1.0)
    assert points[0].p_hallu == pytest.approx(report.p_hallu_pen)
    assert points[2].p_hallu == pytest.approx(report.p_hallu_comp)
