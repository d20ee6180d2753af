"""Synthetic contexts and caption corpora."""

from rlunlearn.environment.contexts import (
    Context,
    Environment,
    Split,
    condition_resolver,
    generate_environment,
)
from rlunlearn.environment.corpus import (
    CaptionRecord,
    Corpus,
    build_coldstart_corpus,
    default_retain_pool,
    generate_abstraction_corpus,
    generate_reference_corpus,
    replace_keywords,
)

__all__ = [
    "CaptionRecord",
    "Context",
    "Corpus",
    "Environment",
    "Split",
    "build_coldstart_corpus",
    "condition_resolver",
    "default_retain_pool",
    "generate_abstraction_corpus",
    "generate_environment",
    "generate_reference_corpus",
    "replace_keywords",
]
