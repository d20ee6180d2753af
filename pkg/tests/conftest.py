"""Shared fixtures."""

import pytest

from rlunlearn.concepts.lexicon import LexiconSpec, build_lexicon
from rlunlearn.config import parse_config
from rlunlearn.environment.contexts import Context, Environment, Split

TOY_VOCABULARY = [
    "dog",
    "puppy",
    "hound",
    "canine",
    "animal",
    "pet",
    "creature",
    "cat",
    "giraffe",
    "horse",
    "rabbit",
    "maybe",
    "the",
    "a",
    "an",
    "runs",
    "fast",
    "by",
    "and",
    "eats",
    "leaves",
]


@pytest.fixture
def toy_spec():
    return LexiconSpec(
        vocabulary=TOY_VOCABULARY,
        forget=["dog"],
        synonyms={"dog": ["canine", "puppy", "hound"]},
        hypernyms={"dog": ["animal", "pet", "creature"], "cat": ["animal"]},
        retain=["cat", "giraffe", "horse", "rabbit"],
        hedges=["maybe"],
    )


@pytest.fixture
def lex(toy_spec):
    return build_lexicon(toy_spec)


@pytest.fixture
def ids(lex):
    """Encode a whitespace-separated caption."""
    return lambda text: lex.vocab.encode(text.split())


@pytest.fixture
def toy_env(lex):
    """Two forget and four retain contexts, split 4 train / 2 test."""
    v = lex.vocab
    concepts = ["dog", "dog", "cat", "giraffe", "cat", "giraffe"]
    contexts = tuple(
        Context(
            id=i,
            concept=v.id_of(name),
            grounded_objects=frozenset({v.id_of(name)}),
            split=Split.FORGET if name == "dog" else Split.RETAIN,
            prompt_ids=(0, 1),
        )
        for i, name in enumerate(concepts)
    )
    return Environment(contexts=contexts, lexicon=lex, train_ids=(0, 2, 3, 5), test_ids=(1, 4))


def small_config(**sections):
    """A config small enough to run the whole pipeline in a test."""
    data = {
        "seed": 11,
        "environment": {"n_contexts": 12},
        "coldstart": {"pretrain_epochs": 40, "epochs": 15},
        "train": {"iterations": 3, "contexts_per_split": 2, "log_every": 1},
        "evaluation": {"samples_per_context": 3},
        "lemma": {"instances": 4, "lambda_grid": [0.0, 0.5, 1.0]},
    }
    for name, values in sections.items():
        if isinstance(values, dict):
            data.setdefault(name, {}).update(values)
        else:
            data[name] = values
    return parse_config(data)


@pytest.fixture
def small_cfg(tmp_path):
    return small_config(output_dir=str(tmp_path / "run"))
