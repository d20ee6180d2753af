"""Tabular generation policy."""

from rlunlearn.policy.checkpoint import load_policy, save_policy
from rlunlearn.policy.distribution import EnumeratedDistribution, distribution_kl
from rlunlearn.policy.mle import fit_mle
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
    token_log_probs,
)

__all__ = [
    "EnumeratedDistribution",
    "TabularPolicy",
    "containment_probability",
    "distribution_kl",
    "enumerate_distribution",
    "fit_mle",
    "init_policy",
    "kl_and_gradient",
    "kl_divergence",
    "load_policy",
    "log_prob",
    "sample",
    "sample_batch",
    "save_policy",
    "sequence_kl",
    "token_log_probs",
]
