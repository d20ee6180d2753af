"""Tests for policy checkpoints."""

import numpy as np
import pytest

from rlunlearn.concepts.lexicon import Vocabulary
from rlunlearn.errors import CheckpointMismatch
from rlunlearn.policy.checkpoint import load_policy, policy_from_dict, policy_to_dict, save_policy
from rlunlearn.policy.tabular import init_policy
from rlunlearn.utils.seeding import derive_rng

VOCAB = Vocabulary.from_names(["a", "b", "c"])


def _policy(history="markov"):
    return init_policy(VOCAB, ["dog/p0", "cat/p0"], 2, 1.5, derive_rng(1, "p"), history)


@pytest.mark.parametrize("history", ["markov", "full"])
def test_save_and_load(tmp_path, history):
    policy = _policy(history)
    path = save_policy(policy, tmp_path / "policy.ckpt")
    loaded = load_policy(path, VOCAB)
    assert loaded.same_space(policy)
    np.testing.assert_array_equal(loaded.logits, policy.logits)


def test_saving_twice_gives_identical_bytes(tmp_path):
    a = save_policy(_policy(), tmp_path / "a.ckpt")
    b = save_policy(_policy(), tmp_path / "b.ckpt")
    assert a.read_bytes() == b.read_bytes()


def test_other_vocabulary_is_rejected(tmp_path):
    path = save_policy(_policy(), tmp_path / "policy.ckpt")
    with pytest.raises(CheckpointMismatch, match="vocabulary"):
        load_policy(path, Vocabulary.from_names(["a", "b", "z"]))


def test_bad_format_and_shape():
    data = policy_to_dict(_policy())
    with pytest.raises(CheckpointMismatch, match="format"):
        policy_from_dict({**data, "format": "other/9"}, VOCAB)
    with pytest.raises(CheckpointMismatch, match="logit count"):
        policy_from_dict({**data, "logits": data["logits"][:-1]}, VOCAB)
    with pytest.raises(CheckpointMismatch):
        policy_from_dict({**data, "history": "bogus"}, VOCAB)
