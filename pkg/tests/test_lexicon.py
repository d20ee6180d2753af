"""Tests for the vocabulary and concept lexicon."""

import pytest

from rlunlearn.concepts.lexicon import (
    BOS,
    BOS_ID,
    LexiconSpec,
    TokenClass,
    Vocabulary,
    build_lexicon,
    classify,
    contains_any,
)
from rlunlearn.errors import OverlappingSets, UnknownToken
from rlunlearn.utils.serializer import ArtifactSerializer


def test_vocabulary_prepends_marker():
    """The begin-of-sequence marker always has id 0."""
    vocab = Vocabulary.from_names(["Dog", "cat"])
    assert vocab.tokens == (BOS, "dog", "cat")
    assert vocab.id_of("dog") == 1
    assert list(vocab.emittable_ids) == [1, 2]


def test_vocabulary_rejects_marker_and_unknown():
    vocab = Vocabulary.from_names(["dog"])
    with pytest.raises(UnknownToken, match="reserved"):
        vocab.id_of(BOS)
    with pytest.raises(UnknownToken):
        vocab.id_of("zebra")
    with pytest.raises(UnknownToken):
        Vocabulary.from_names([BOS, "dog"])


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError, match="Duplicate"):
        Vocabulary.from_names(["dog", "Dog"])


def test_build_lexicon_id_sets(lex):
    """Synonym and hypernym words resolve to the expected id sets."""
    v = lex.vocab
    assert lex.forget_keywords == {v.id_of("dog")}
    assert lex.forget_synonyms == {v.id_of(n) for n in ("canine", "puppy", "hound")}
    assert lex.forget_hypernyms == {v.id_of(n) for n in ("animal", "pet", "creature")}
    assert lex.penalized == lex.forget_keywords | lex.forget_synonyms


def test_empty_sets_classify_everything_as_other():
    lex = build_lexicon(LexiconSpec(vocabulary=["a", "b"]))
    assert classify(lex, 1) == TokenClass.OTHER
    assert classify(lex, 2) == TokenClass.OTHER


def test_overlapping_forget_and_retain():
    with pytest.raises(OverlappingSets, match="dog"):
        build_lexicon(LexiconSpec(vocabulary=["dog"], forget=["dog"], retain=["dog"]))


def test_hypernym_may_not_be_a_synonym():
    spec = LexiconSpec(
        vocabulary=["dog", "puppy"],
        forget=["dog"],
        synonyms={"dog": ["puppy"]},
        hypernyms={"dog": ["puppy"]},
    )
    with pytest.raises(OverlappingSets):
        build_lexicon(spec)


def test_unknown_word_in_spec():
    with pytest.raises(UnknownToken, match="zebra"):
        build_lexicon(LexiconSpec(vocabulary=["dog"], forget=["zebra"]))


def test_classify(lex):
    v = lex.vocab
    assert classify(lex, v.id_of("dog")) == TokenClass.FORGET
    assert classify(lex, v.id_of("puppy")) == TokenClass.SYNONYM
    assert classify(lex, v.id_of("animal")) == TokenClass.HYPERNYM
    assert classify(lex, v.id_of("giraffe")) == TokenClass.RETAIN
    assert classify(lex, v.id_of("maybe")) == TokenClass.HEDGE
    assert classify(lex, v.id_of("runs")) == TokenClass.OTHER


def test_classify_marker_is_an_error(lex):
    with pytest.raises(UnknownToken, match="begin-of-sequence"):
        classify(lex, BOS_ID)


def test_contains_any(lex, ids):
    giraffe = {lex.vocab.id_of("giraffe")}
    assert contains_any(ids("a giraffe"), giraffe)
    assert not contains_any((), giraffe)
    assert contains_any(ids("giraffe giraffe"), giraffe)
    assert not contains_any(ids("a cat"), giraffe)


def test_spec_round_trip_is_byte_identical(lex, tmp_path):
    """A spec rebuilt from a lexicon serializes to the same canonical bytes."""
    rebuilt = lex.to_spec()
    assert build_lexicon(rebuilt).to_spec().canonical_bytes() == rebuilt.canonical_bytes()
    path = ArtifactSerializer.write(tmp_path / "lexicon.json", rebuilt)
    assert LexiconSpec.from_file(path).canonical_bytes() == path.read_bytes()


def test_spec_rejects_unknown_keys():
    with pytest.raises(ValueError, match="colour"):
        LexiconSpec.model_validate({"vocabulary": ["dog"], "colour": "red"})


def test_bundled_preset_builds():
    """The shipped lexicon is internally consistent."""
    lex = build_lexicon(LexiconSpec.preset())
    v = lex.vocab
    assert lex.forget_keywords == {v.id_of("dog")}
    assert v.id_of("animal") in lex.forget_hypernyms
    assert v.id_of("fox") in lex.object_tokens
    assert v.id_of("fox") not in lex.retain_keywords
