"""Synthetic contexts standing in for labelled images."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Optional

import numpy as np

from rlunlearn.concepts.lexicon import ConceptLexicon
from rlunlearn.config import EnvironmentConfig
from rlunlearn.errors import InsufficientConcepts

logger = logging.getLogger(__name__)


class Split(str, Enum):
    """Forget/retain label of a context."""

    FORGET = "forget"
    RETAIN = "retain"


@dataclass(frozen=True)
class Context:
    """One synthetic input.

    Attributes:
        id: Stable context id.
        concept: The object the context depicts.
        grounded_objects: The objects actually present.
        split: Forget or retain label.
        prompt_ids: Generative prompt variants asked about this context.
    """

    id: int
    concept: int
    grounded_objects: frozenset[int]
    split: Split
    prompt_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.grounded_objects:
            raise ValueError(f"Context {self.id} has no grounded objects")
        if self.concept not in self.grounded_objects:
            raise ValueError(f"Context {self.id} concept is not grounded")


@dataclass(frozen=True)
class Environment:
    """Contexts plus a disjoint train/test partition of their ids."""

    contexts: tuple[Context, ...]
    lexicon: ConceptLexicon = field(repr=False, compare=False)
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]

    def __post_init__(self):
        ids = {c.id for c in self.contexts}
        train, test = set(self.train_ids), set(self.test_ids)
        if train & test:
            raise ValueError("train and test partitions overlap")
        if train | test != ids:
            raise ValueError("train and test partitions do not cover all contexts")
        for c in self.contexts:
            self._check_label(c)
        labels = {c.id: c.split for c in self.contexts}
        for name, part in (("train", train), ("test", test)):
            if {labels[i] for i in part} != set(Split):
                raise ValueError(f"{name} split needs a forget and a retain context")
        object.__setattr__(self, "_by_id", {c.id: c for c in self.contexts})

    def _check_label(self, ctx: Context) -> None:
        lex = self.lexicon
        if ctx.split == Split.FORGET and not ctx.grounded_objects & lex.forget_keywords:
            raise ValueError(f"Forget context {ctx.id} grounds no forget keyword")
        if ctx.split == Split.RETAIN and ctx.grounded_objects & lex.penalized:
            raise ValueError(f"Retain context {ctx.id} grounds a forget keyword or synonym")

    def context(self, context_id: int) -> Context:
        return self._by_id[context_id]

    def train_contexts(self, split: Optional[Split] = None) -> list[Context]:
        return self._select(self.train_ids, split)

    def test_contexts(self, split: Optional[Split] = None) -> list[Context]:
        return self._select(self.test_ids, split)

    def _select(self, ids: Iterable[int], split: Optional[Split]) -> list[Context]:
        chosen = [self._by_id[i] for i in sorted(ids)]
        if split is not None:
            chosen = [c for c in chosen if c.split == split]
        return chosen

    @property
    def prompt_ids(self) -> tuple[int, ...]:
        return tuple(sorted({p for c in self.contexts for p in c.prompt_ids}))

    def conditions(self, granularity: str = "class") -> list[str]:
        """All condition keys, sorted, for the given granularity."""
        key = condition_resolver(self, granularity)
        return sorted({key(c.id, p) for c in self.contexts for p in c.prompt_ids})

    def to_dict(self) -> dict[str, Any]:
        vocab = self.lexicon.vocab
        return {
            "contexts": [
                {
                    "id": c.id,
                    "concept": vocab.name_of(c.concept),
                    "grounded_objects": sorted(vocab.name_of(t) for t in c.grounded_objects),
                    "split": c.split.value,
                    "prompt_ids": list(c.prompt_ids),
                }
                for c in self.contexts
            ],
            "splits": {"train": sorted(self.train_ids), "test": sorted(self.test_ids)},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], lexicon: ConceptLexicon) -> "Environment":
        vocab = lexicon.vocab
        contexts = tuple(
            Context(
                id=int(c["id"]),
                concept=vocab.id_of(c["concept"]),
                grounded_objects=frozenset(vocab.id_of(t) for t in c["grounded_objects"]),
                split=Split(c["split"]),
                prompt_ids=tuple(int(p) for p in c["prompt_ids"]),
            )
            for c in data["contexts"]
        )
        return cls(
            contexts=contexts,
            lexicon=lexicon,
            train_ids=tuple(int(i) for i in data["splits"]["train"]),
            test_ids=tuple(int(i) for i in data["splits"]["test"]),
        )


def condition_resolver(env: Environment, granularity: str = "class") -> Callable[[int, int], str]:
    """Map (context id, prompt id) to a policy condition key.

    ``class`` shares one condition per (concept, prompt); ``context`` gives
    every context its own rows.
    """
    vocab = env.lexicon.vocab
    if granularity == "class":
        return lambda cid, pid: f"{vocab.name_of(env.context(cid).concept)}/p{pid}"
    if granularity == "context":
        return lambda cid, pid: f"ctx{cid}/p{pid}"
    raise ValueError(f"Unknown condition granularity: {granularity}")


def _assign_concepts(pool: list[int], count: int, rng: np.random.Generator) -> list[int]:
    # balanced over the pool, order shuffled
    order = [pool[i] for i in rng.permutation(len(pool))]
    assigned = [order[i % len(order)] for i in range(count)]
    return [assigned[i] for i in rng.permutation(count)]


def _pick_test(
    contexts: list[Context], n_test: int, rng: np.random.Generator
) -> set[int]:
    by_concept: dict[int, list[int]] = {}
    for c in contexts:
        by_concept.setdefault(c.concept, []).append(c.id)
    for ids in by_concept.values():
        rng.shuffle(ids)
    label = {c.concept: c.split for c in contexts}
    concept_of = {c.id: c.concept for c in contexts}

    test: set[int] = set()
    remaining = {k: list(v) for k, v in by_concept.items()}

    def take(concept: int) -> None:
        test.add(remaining[concept].pop())

    def train_left(split: Split) -> int:
        return sum(len(ids) for k, ids in remaining.items() if label[k] == split)

    # one of each label first, preferring concepts that keep a train example
    for split in (Split.FORGET, Split.RETAIN):
        if train_left(split) < 2:
            raise InsufficientConcepts(
                f"need at least two {split.value} contexts to populate both splits"
            )
        own = sorted(k for k in remaining if label[k] == split)
        candidates = [k for k in own if len(remaining[k]) >= 2] or own
        take(candidates[int(rng.integers(len(candidates)))])

    concepts = sorted(remaining)
    order = [concepts[i] for i in rng.permutation(len(concepts))]
    while len(test) < n_test:
        progressed = False
        for concept in order:
            if len(test) >= n_test:
                break
            if len(remaining[concept]) >= 2:
                take(concept)
                progressed = True
        if not progressed:
            break

    if len(test) < n_test:
        # every concept is down to one train context; fill while keeping a
        # train context of each label
        leftovers = sorted(i for ids in remaining.values() for i in ids)
        for cid in (leftovers[i] for i in rng.permutation(len(leftovers))):
            if len(test) >= n_test:
                break
            concept = concept_of[cid]
            if train_left(label[concept]) >= 2:
                test.add(cid)
                remaining[concept].remove(cid)
    return test


def generate_environment(
    config: EnvironmentConfig, lex: ConceptLexicon, rng: np.random.Generator
) -> Environment:
    """Generate contexts and a stratified train/test split.

    Args:
        config: Counts, concept pool, split ratio and prompt ids.
        lex: Lexicon the concept pool is drawn from.
        rng: Source of randomness.

    Returns:
        Environment whose split honours ``config.split_ratio``.

    Raises:
        InsufficientConcepts: the pool or counts cannot give both splits a
            forget and a retain context.
    """
    vocab = lex.vocab
    if config.concepts is None:
        pool = sorted(lex.forget_keywords | lex.retain_keywords)
    else:
        pool = sorted({vocab.id_of(n) for n in config.concepts})
    forget_pool = [t for t in pool if t in lex.forget_keywords]
    retain_pool = [t for t in pool if t in lex.retain_keywords]
    keywords = lex.forget_keywords | lex.retain_keywords
    unusable = [vocab.name_of(t) for t in pool if t not in keywords]
    if unusable:
        raise InsufficientConcepts(f"concepts {unusable} are neither forget nor retain keywords")
    if not forget_pool or not retain_pool:
        raise InsufficientConcepts("need at least one forget concept and one retain concept")

    n = config.n_contexts
    num, den = config.split_ratio
    n_test = int(round(n * den / (num + den)))
    if n < 4 or n_test < 2 or n - n_test < 2:
        raise InsufficientConcepts(
            f"n_contexts={n} cannot place a forget and a retain context in both splits"
        )
    n_forget = min(max(2, int(round(n * config.forget_fraction))), n - 2)

    concepts = _assign_concepts(forget_pool, n_forget, rng) + _assign_concepts(
        retain_pool, n - n_forget, rng
    )
    prompt_ids = tuple(sorted(config.prompt_ids))
    contexts = [
        Context(
            id=i,
            concept=concept,
            grounded_objects=frozenset({concept}),
            split=Split.FORGET if concept in lex.forget_keywords else Split.RETAIN,
            prompt_ids=prompt_ids,
        )
        for i, concept in enumerate(concepts)
    ]

    test = _pick_test(contexts, n_test, rng)
    train = sorted(c.id for c in contexts if c.id not in test)
    env = Environment(
        contexts=tuple(contexts), lexicon=lex, train_ids=tuple(train), test_ids=tuple(sorted(test))
    )
    logger.info(
        f"Generated environment: {n} contexts ({n_forget} forget), "
        f"{len(train)} train / {len(test)} test"
    )
    return env
