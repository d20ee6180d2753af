"""Concept lexicon and vocabulary."""

from rlunlearn.concepts.lexicon import (
    BOS,
    BOS_ID,
    ConceptLexicon,
    LexiconSpec,
    TokenClass,
    Vocabulary,
    build_lexicon,
    classify,
    contains_any,
)

__all__ = [
    "BOS",
    "BOS_ID",
    "ConceptLexicon",
    "LexiconSpec",
    "TokenClass",
    "Vocabulary",
    "build_lexicon",
    "classify",
    "contains_any",
]
