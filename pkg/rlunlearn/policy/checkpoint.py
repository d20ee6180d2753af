"""Policy checkpoints: canonical JSON with the logits in row-major order."""

import logging
from pathlib import Path
from typing import Any, Union

import numpy as np

from rlunlearn.concepts.lexicon import Vocabulary
from rlunlearn.errors import CheckpointMismatch
from rlunlearn.policy.tabular import TabularPolicy
from rlunlearn.utils.serializer import ArtifactSerializer

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "rlunlearn-policy/1"


def policy_to_dict(policy: TabularPolicy) -> dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "vocab_hash": policy.vocab.digest(),
        "length": policy.length,
        "history": policy.history,
        "conditions": {c: i for i, c in enumerate(policy.conditions)},
        "shape": list(policy.logits.shape),
        "logits": [float(x) for x in policy.logits.ravel(order="C")],
    }


def policy_from_dict(data: dict[str, Any], vocab: Vocabulary) -> TabularPolicy:
    """Rebuild a policy, validating it against ``vocab``.

    Raises:
        CheckpointMismatch: wrong format, vocabulary hash or shape.
    """
    if data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointMismatch(f"unsupported checkpoint format {data.get('format')!r}")
    if data["vocab_hash"] != vocab.digest():
        raise CheckpointMismatch("checkpoint was written for a different vocabulary")
    index = data["conditions"]
    conditions = sorted(index, key=lambda c: index[c])
    if [index[c] for c in conditions] != list(range(len(conditions))):
        raise CheckpointMismatch("condition index map is not a permutation")
    shape = tuple(int(s) for s in data["shape"])
    logits = np.asarray(data["logits"], dtype=np.float64)
    if logits.size != int(np.prod(shape)):
        raise CheckpointMismatch(f"logit count {logits.size} does not match shape {shape}")
    try:
        return TabularPolicy(
            vocab, conditions, int(data["length"]), logits.reshape(shape), data["history"]
        )
    except ValueError as e:
        raise CheckpointMismatch(str(e)) from e


def save_policy(policy: TabularPolicy, path: Union[str, Path]) -> Path:
    path = ArtifactSerializer.write(Path(path), policy_to_dict(policy))
    logger.debug(f"Saved {policy!r} to {path}")
    return path


def load_policy(path: Union[str, Path], vocab: Vocabulary) -> TabularPolicy:
    return policy_from_dict(ArtifactSerializer.read(Path(path)), vocab)
