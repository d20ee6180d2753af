"""Caption corpora: reference captions, abstraction captions and the cold-start corpus."""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from rlunlearn.concepts.lexicon import BOS_ID, ConceptLexicon, TokenClass, Vocabulary, classify
from rlunlearn.config import SLOT
from rlunlearn.environment.contexts import Context, Environment, Split
from rlunlearn.errors import EmptyReplacementPool, OverlappingSets, TemplateLengthMismatch
from rlunlearn.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

Templates = Mapping[int, Sequence[Sequence[str]]]


@dataclass(frozen=True)
class CaptionRecord:
    context_id: int
    prompt_id: int
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class Corpus:
    """Fixed-length caption records."""

    records: tuple[CaptionRecord, ...]
    length: int

    def __post_init__(self):
        for r in self.records:
            if len(r.tokens) != self.length:
                raise TemplateLengthMismatch(
                    f"record for context {r.context_id} has length {len(r.tokens)}, "
                    f"expected {self.length}"
                )
            if BOS_ID in r.tokens:
                raise ValueError(f"record for context {r.context_id} contains the reserved marker")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def merged(self, other: "Corpus") -> "Corpus":
        if other.length != self.length:
            raise TemplateLengthMismatch("cannot merge corpora of different lengths")
        return Corpus(self.records + other.records, self.length)

    def to_lines(self, vocab: Vocabulary) -> list[dict[str, Any]]:
        return [
            {"context_id": r.context_id, "prompt_id": r.prompt_id, "tokens": vocab.decode(r.tokens)}
            for r in self.records
        ]

    @classmethod
    def from_lines(cls, lines: Iterable[Mapping[str, Any]], vocab: Vocabulary, length: int):
        records = tuple(
            CaptionRecord(
                context_id=int(line["context_id"]),
                prompt_id=int(line["prompt_id"]),
                tokens=vocab.encode(line["tokens"]),
            )
            for line in lines
        )
        return cls(records, length)


@dataclass(frozen=True)
class _Template:
    tokens: tuple[int, ...]
    slot: int


def compile_templates(
    templates: Templates, vocab: Vocabulary, length: int
) -> dict[int, list[_Template]]:
    """Resolve template words to ids and locate the object slot.

    Raises:
        TemplateLengthMismatch: a template is not ``length`` long or does not
            have exactly one slot.
    """
    compiled: dict[int, list[_Template]] = {}
    for prompt_id, group in templates.items():
        out = []
        for words in group:
            if len(words) != length:
                raise TemplateLengthMismatch(
                    f"template {list(words)} has length {len(words)}, expected {length}"
                )
            slots = [i for i, w in enumerate(words) if w == SLOT]
            if len(slots) != 1:
                raise TemplateLengthMismatch(
                    f"template {list(words)} must have exactly one {SLOT!r} slot"
                )
            ids = tuple(BOS_ID if w == SLOT else vocab.id_of(w) for w in words)
            out.append(_Template(ids, slots[0]))
        compiled[int(prompt_id)] = out
    return compiled


def _template_length(templates: Templates) -> int:
    for group in templates.values():
        for words in group:
            return len(words)
    raise TemplateLengthMismatch("no caption templates configured")


def _fill(template: _Template, token: int) -> tuple[int, ...]:
    tokens = list(template.tokens)
    tokens[template.slot] = token
    return tuple(tokens)


def _caption_records(
    env: Environment,
    templates: Templates,
    length: int,
    seed: int,
    stage: str,
    fillers_of: Callable[[Context], list[int]],
    per_prompt: int,
    contexts: Optional[Sequence[Context]],
) -> list[CaptionRecord]:
    compiled = compile_templates(templates, env.lexicon.vocab, length)
    records = []
    for ctx in contexts if contexts is not None else env.train_contexts():
        fillers = fillers_of(ctx)
        if not fillers:
            continue
        rng = derive_rng(seed, stage, ctx.id)
        for prompt_id in ctx.prompt_ids:
            group = compiled.get(prompt_id)
            if not group:
                raise TemplateLengthMismatch(f"no templates for prompt {prompt_id}")
            for _ in range(per_prompt):
                template = group[int(rng.integers(len(group)))]
                token = fillers[int(rng.integers(len(fillers)))]
                records.append(CaptionRecord(ctx.id, prompt_id, _fill(template, token)))
    return records


def generate_reference_corpus(
    env: Environment,
    templates: Templates,
    seed: int,
    *,
    length: Optional[int] = None,
    captions_per_prompt: int = 1,
    contexts: Optional[Sequence[Context]] = None,
) -> Corpus:
    """Caption every train context (or ``contexts``) once per prompt id per caption.

    The object slot is always filled with a grounded object, so every
    forget-context caption names the forgotten concept and every
    retain-context caption names its retain keyword. Each context draws from
    its own seed stream.
    """
    length = length or _template_length(templates)
    records = _caption_records(
        env,
        templates,
        length,
        seed,
        "reference",
        lambda ctx: sorted(ctx.grounded_objects),
        captions_per_prompt,
        contexts,
    )
    logger.info(f"Reference corpus: {len(records)} records")
    return Corpus(tuple(records), length)


def generate_abstraction_corpus(
    env: Environment,
    templates: Templates,
    seed: int,
    *,
    length: Optional[int] = None,
    captions_per_prompt: int = 1,
    contexts: Optional[Sequence[Context]] = None,
) -> Corpus:
    """Captions naming a hypernym of the context's objects instead of the object.

    Contexts whose objects have no hypernym are skipped.
    """
    lex = env.lexicon
    length = length or _template_length(templates)
    records = _caption_records(
        env,
        templates,
        length,
        seed,
        "abstraction",
        lambda ctx: sorted(lex.hypernyms_of(ctx.grounded_objects)),
        captions_per_prompt,
        contexts,
    )
    logger.info(f"Abstraction corpus: {len(records)} records")
    return Corpus(tuple(records), length)


def replace_keywords(
    caption: Sequence[int],
    lex: ConceptLexicon,
    retain_pool: Sequence[int],
    rng: np.random.Generator,
) -> tuple[int, ...]:
    """Replace every forget keyword or synonym with an independent draw from ``retain_pool``.

    Raises:
        EmptyReplacementPool: ``retain_pool`` is empty.
        OverlappingSets: the pool contains a forget keyword or synonym.
    """
    pool = sorted(set(retain_pool))
    if not pool:
        raise EmptyReplacementPool("replacement pool is empty")
    clash = set(pool) & lex.penalized
    if clash:
        raise OverlappingSets(lex.vocab.name_of(min(clash)), "retain_pool", "forget/synonyms")
    out = []
    for token in caption:
        if classify(lex, token) in (TokenClass.FORGET, TokenClass.SYNONYM):
            out.append(pool[int(rng.integers(len(pool)))])
        else:
            out.append(token)
    return tuple(out)


def default_retain_pool(lex: ConceptLexicon, concept: int) -> list[int]:
    """Retain keywords sharing a hypernym with ``concept``; all retain keywords if none do."""
    hyper = lex.hypernyms.get(concept, frozenset())
    siblings = sorted(r for r in lex.retain_keywords if lex.hypernyms.get(r, frozenset()) & hyper)
    return siblings or sorted(lex.retain_keywords)


def build_coldstart_corpus(
    env: Environment,
    reference: Corpus,
    lex: ConceptLexicon,
    seed: int,
    retain_pool: Optional[Sequence[int]] = None,
) -> Corpus:
    """Scrub forget-context captions with keyword replacement; pass retain captions through.

    Args:
        env: Environment the records refer to.
        reference: Reference caption corpus.
        lex: Lexicon.
        seed: Master seed; record ``i`` uses its own derived stream.
        retain_pool: Replacement tokens; defaults per context to the retain
            concepts that share a hypernym with the forgotten concept.
    """
    covered = {r.context_id for r in reference}
    missing = [c.id for c in env.train_contexts() if c.id not in covered]
    if reference.records and missing:
        logger.warning(f"Reference corpus does not cover train contexts {missing}")

    records = []
    replaced = 0
    for i, record in enumerate(reference):
        ctx = env.context(record.context_id)
        if ctx.split != Split.FORGET:
            records.append(record)
            continue
        pool = retain_pool if retain_pool is not None else default_retain_pool(lex, ctx.concept)
        tokens = replace_keywords(record.tokens, lex, pool, derive_rng(seed, "coldstart", i))
        replaced += tokens != record.tokens
        records.append(CaptionRecord(record.context_id, record.prompt_id, tokens))
    logger.info(f"Cold-start corpus: {len(records)} records, {replaced} rewritten")
    return Corpus(tuple(records), reference.length)
