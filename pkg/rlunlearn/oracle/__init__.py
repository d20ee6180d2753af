"""Closed-form analysis of KL-regularized reward optima."""

from rlunlearn.oracle.closed_form import (
    HallucinationSpec,
    LemmaReport,
    hallucination_prob,
    hallucination_spec_for,
    optimal_policy,
    partition_function,
    verify_lemma1,
)
from rlunlearn.oracle.sweep import LambdaPoint, LemmaSummary, lambda_sweep, lemma_sweep

__all__ = [
    "HallucinationSpec",
    "LambdaPoint",
    "LemmaReport",
    "LemmaSummary",
    "hallucination_prob",
    "hallucination_spec_for",
    "lambda_sweep",
    "lemma_sweep",
    "optimal_policy",
    "partition_function",
    "verify_lemma1",
]
