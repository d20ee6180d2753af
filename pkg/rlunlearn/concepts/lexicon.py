"""Vocabulary, concept lexicon and token classification."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import AbstractSet, Iterable, Mapping, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field

from rlunlearn.errors import OverlappingSets, UnknownToken
from rlunlearn.utils.serializer import ArtifactSerializer

logger = logging.getLogger(__name__)

BOS = "<bos>"
BOS_ID = 0

TokenIds = frozenset[int]


class TokenClass(str, Enum):
    """Reward-relevant class of a vocabulary token."""

    FORGET = "forget"
    SYNONYM = "synonym"
    HYPERNYM = "hypernym"
    RETAIN = "retain"
    HEDGE = "hedge"
    OTHER = "other"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered lowercase tokens; id 0 is the begin-of-sequence marker."""

    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != BOS:
            raise ValueError(f"Vocabulary must start with the reserved marker {BOS!r}")
        index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok != tok.lower():
                raise ValueError(f"Vocabulary token {tok!r} is not lowercase")
            if tok in index:
                raise ValueError(f"Duplicate vocabulary token {tok!r}")
            index[tok] = i
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "Vocabulary":
        """Build from user-facing names; the marker is prepended automatically."""
        normalized = []
        for name in names:
            tok = name.strip().lower()
            if tok == BOS:
                raise UnknownToken(name, "reserved begin-of-sequence marker")
            normalized.append(tok)
        return cls((BOS, *normalized))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def emittable_ids(self) -> range:
        return range(1, len(self.tokens))

    def id_of(self, name: str) -> int:
        tok = name.strip().lower()
        if tok == BOS:
            raise UnknownToken(name, "reserved begin-of-sequence marker")
        try:
            return self._index[tok]
        except KeyError:
            raise UnknownToken(name) from None

    def name_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise UnknownToken(token_id)
        return self.tokens[token_id]

    def encode(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.id_of(n) for n in names)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.name_of(int(i)) for i in ids]

    def digest(self) -> str:
        """Stable hash used to tie checkpoints to a vocabulary."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


class LexiconSpec(BaseModel):
    """On-disk lexicon description (string-named sets).

    ``synonyms`` and ``hypernyms`` map a concept to its related words.
    ``objects`` lists extra object words that belong to no concept set but
    still count as object mentions for hallucination judging.
    """

    model_config = ConfigDict(extra="forbid")

    vocabulary: list[str]
    forget: list[str] = Field(default_factory=list)
    synonyms: dict[str, list[str]] = Field(default_factory=dict)
    hypernyms: dict[str, list[str]] = Field(default_factory=dict)
    retain: list[str] = Field(default_factory=list)
    hedges: list[str] = Field(default_factory=list)
    objects: list[str] = Field(default_factory=list)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "LexiconSpec":
        return cls.model_validate(ArtifactSerializer.read(Path(path)))

    @classmethod
    def preset(cls, name: str = "animals") -> "LexiconSpec":
        """Load a lexicon shipped with the package."""
        text = resources.files("rlunlearn.presets").joinpath(f"{name}_lexicon.json").read_text(
            encoding="utf-8"
        )
        return cls.model_validate_json(text)

    def canonical_bytes(self) -> bytes:
        return ArtifactSerializer.serialize(self)


@dataclass(frozen=True)
class ConceptLexicon:
    """Token-id concept sets; the single source of truth for keyword matching."""

    vocab: Vocabulary
    forget_keywords: TokenIds
    synonyms: Mapping[int, TokenIds]
    hypernyms: Mapping[int, TokenIds]
    retain_keywords: TokenIds
    hedge_tokens: TokenIds
    extra_objects: TokenIds = frozenset()

    @cached_property
    def forget_synonyms(self) -> TokenIds:
        """Syn(D_f)."""
        return frozenset().union(*(self.synonyms.get(f, frozenset()) for f in self.forget_keywords))

    @cached_property
    def forget_hypernyms(self) -> TokenIds:
        """Hyper(D_f)."""
        return frozenset().union(
            *(self.hypernyms.get(f, frozenset()) for f in self.forget_keywords)
        )

    @cached_property
    def penalized(self) -> TokenIds:
        """D_f ∪ Syn(D_f)."""
        return self.forget_keywords | self.forget_synonyms

    @cached_property
    def all_hypernyms(self) -> TokenIds:
        return frozenset().union(*self.hypernyms.values())

    @cached_property
    def object_tokens(self) -> TokenIds:
        """Words that name a concrete object."""
        return (
            self.forget_keywords
            | frozenset().union(*self.synonyms.values())
            | self.retain_keywords
            | self.extra_objects
        )

    @cached_property
    def _classes(self) -> dict[int, TokenClass]:
        table = {}
        for tid in self.vocab.emittable_ids:
            if tid in self.forget_keywords:
                table[tid] = TokenClass.FORGET
            elif tid in self.forget_synonyms:
                table[tid] = TokenClass.SYNONYM
            elif tid in self.all_hypernyms:
                table[tid] = TokenClass.HYPERNYM
            elif tid in self.retain_keywords:
                table[tid] = TokenClass.RETAIN
            elif tid in self.hedge_tokens:
                table[tid] = TokenClass.HEDGE
            else:
                table[tid] = TokenClass.OTHER
        return table

    def synonyms_of(self, concepts: Iterable[int]) -> TokenIds:
        return frozenset().union(*(self.synonyms.get(c, frozenset()) for c in concepts))

    def hypernyms_of(self, concepts: Iterable[int]) -> TokenIds:
        return frozenset().union(*(self.hypernyms.get(c, frozenset()) for c in concepts))

    def names(self, ids: Iterable[int]) -> list[str]:
        return sorted(self.vocab.name_of(i) for i in ids)

    def to_spec(self) -> LexiconSpec:
        v = self.vocab
        return LexiconSpec(
            vocabulary=list(v.tokens[1:]),
            forget=self.names(self.forget_keywords),
            synonyms={v.name_of(k): self.names(s) for k, s in sorted(self.synonyms.items())},
            hypernyms={v.name_of(k): self.names(s) for k, s in sorted(self.hypernyms.items())},
            retain=self.names(self.retain_keywords),
            hedges=self.names(self.hedge_tokens),
            objects=self.names(self.extra_objects),
        )


def _ids(vocab: Vocabulary, names: Iterable[str]) -> TokenIds:
    return frozenset(vocab.id_of(n) for n in names)


def _check_disjoint(vocab: Vocabulary, named_sets: Sequence[tuple[str, AbstractSet[int]]]) -> None:
    for i, (first_name, first) in enumerate(named_sets):
        for second_name, second in named_sets[i + 1 :]:
            shared = first & second
            if shared:
                token = vocab.name_of(min(shared))
                raise OverlappingSets(token, first_name, second_name)


def build_lexicon(spec: LexiconSpec) -> ConceptLexicon:
    """Resolve a string-named lexicon description into token-id sets.

    Raises:
        UnknownToken: a named word is not in the vocabulary.
        OverlappingSets: two sets that must be disjoint share a word.
    """
    vocab = Vocabulary.from_names(spec.vocabulary)

    forget = _ids(vocab, spec.forget)
    retain = _ids(vocab, spec.retain)
    hedges = _ids(vocab, spec.hedges)
    objects = _ids(vocab, spec.objects)
    synonyms = {vocab.id_of(k): _ids(vocab, v) for k, v in spec.synonyms.items()}
    hypernyms = {vocab.id_of(k): _ids(vocab, v) for k, v in spec.hypernyms.items()}

    forget_syn = frozenset().union(*(synonyms.get(f, frozenset()) for f in forget))
    forget_hyper = frozenset().union(*(hypernyms.get(f, frozenset()) for f in forget))
    other_syn = frozenset().union(*(s for k, s in synonyms.items() if k not in forget))
    other_hyper = frozenset().union(*(s for k, s in hypernyms.items() if k not in forget))

    _check_disjoint(
        vocab,
        [
            ("forget", forget),
            ("synonyms", forget_syn),
            ("hypernyms", forget_hyper),
            ("retain", retain),
        ],
    )
    # every hypernym must classify uniquely, and the remaining word lists may
    # not collide with the core sets either
    _check_disjoint(vocab, [("forget", forget | forget_syn | retain), ("hypernyms", other_hyper)])
    _check_disjoint(vocab, [("forget", forget | forget_syn), ("synonyms", other_syn)])
    concept_words = forget | forget_syn | forget_hyper | retain | other_syn | other_hyper
    _check_disjoint(vocab, [("concepts", concept_words), ("hedges", hedges)])
    _check_disjoint(vocab, [("concepts", concept_words | hedges), ("objects", objects)])

    lex = ConceptLexicon(
        vocab=vocab,
        forget_keywords=forget,
        synonyms=synonyms,
        hypernyms=hypernyms,
        retain_keywords=retain,
        hedge_tokens=hedges,
        extra_objects=objects,
    )
    logger.debug(
        f"Built lexicon: |V|={vocab.size} forget={len(forget)} synonyms={len(forget_syn)} "
        f"hypernyms={len(forget_hyper)} retain={len(retain)} hedges={len(hedges)}"
    )
    return lex


def classify(lex: ConceptLexicon, token_id: int) -> TokenClass:
    """Class of ``token_id``; the reserved marker is not classifiable."""
    if token_id == BOS_ID:
        raise UnknownToken(token_id, "begin-of-sequence marker cannot be classified")
    try:
        return lex._classes[int(token_id)]
    except KeyError:
        raise UnknownToken(token_id) from None


def contains_any(seq: Iterable[int], token_set: AbstractSet[int]) -> bool:
    """True iff at least one token of ``seq`` is in ``token_set``."""
    return any(t in token_set for t in seq)
