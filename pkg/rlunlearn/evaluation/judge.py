"""Hallucination judges.

A generation hallucinates when it names, without hedging, an object that is
not in the context. Objects in the context, their synonyms and hypernyms, and
hypernyms of the forgotten concept are always acceptable.
"""

import json
import logging
import subprocess
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Protocol, Sequence

from rlunlearn.concepts.lexicon import ConceptLexicon
from rlunlearn.environment.contexts import Context
from rlunlearn.errors import JudgeFailed

logger = logging.getLogger(__name__)


class Certainty(str, Enum):
    CERTAIN = "certain"
    HEDGED = "hedged"


@dataclass(frozen=True)
class JudgeVerdict:
    """Outcome of judging one generation.

    ``certainty`` is HEDGED when an ungrounded object was mentioned only after
    a hedge, which is why the generation was not counted.
    """

    hallucinated: bool
    offending: Optional[int] = None
    certainty: Certainty = Certainty.CERTAIN

    def __post_init__(self):
        if self.hallucinated != (self.offending is not None):
            raise ValueError("offending token must be set iff the verdict is hallucinated")

    def to_dict(self, lex: ConceptLexicon) -> dict[str, Any]:
        return {
            "hallucinated": self.hallucinated,
            "offending": None if self.offending is None else lex.vocab.name_of(self.offending),
            "certainty": self.certainty.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], lex: ConceptLexicon) -> "JudgeVerdict":
        offending = data.get("offending")
        return cls(
            hallucinated=bool(data["hallucinated"]),
            offending=None if offending is None else lex.vocab.id_of(offending),
            certainty=Certainty(data.get("certainty", Certainty.CERTAIN.value)),
        )


class Judge(Protocol):
    def __call__(self, seq: Sequence[int], context: Context) -> JudgeVerdict: ...


def acceptable_objects(context: Context, lex: ConceptLexicon) -> frozenset[int]:
    """Grounded objects with their synonyms and hypernyms, plus hypernyms of the forgotten concept."""
    grounded = context.grounded_objects
    return (
        grounded | lex.synonyms_of(grounded) | lex.hypernyms_of(grounded) | lex.forget_hypernyms
    )


def judge(seq: Sequence[int], context: Context, lex: ConceptLexicon) -> JudgeVerdict:
    """Rule-based verdict; a mention is certain iff no hedge appears before it."""
    allowed = acceptable_objects(context, lex)
    hedged_seen = False
    hedged_miss = False
    for token in seq:
        if token in lex.hedge_tokens:
            hedged_seen = True
            continue
        if token not in lex.object_tokens or token in allowed:
            continue
        if not hedged_seen:
            return JudgeVerdict(True, token, Certainty.CERTAIN)
        hedged_miss = True
    return JudgeVerdict(False, None, Certainty.HEDGED if hedged_miss else Certainty.CERTAIN)


class RuleBasedJudge:
    """Default judge bound to one lexicon."""

    def __init__(self, lex: ConceptLexicon):
        self.lex = lex

    def __call__(self, seq: Sequence[int], context: Context) -> JudgeVerdict:
        return judge(seq, context, self.lex)


class SubprocessJudge:
    """Delegates each verdict to an external command.

    The command receives one JSON object on stdin::

        {"tokens": [...], "grounded_objects": [...], "split": "forget"}

    and must print one JSON verdict on stdout with the keys ``hallucinated``,
    ``offending`` (token or null) and ``certainty``.
    """

    def __init__(self, command: Sequence[str], lex: ConceptLexicon, timeout: float = 30.0):
        if not command:
            raise ValueError("SubprocessJudge needs a command")
        self.command = list(command)
        self.lex = lex
        self.timeout = timeout

    def request(self, seq: Sequence[int], context: Context) -> dict[str, Any]:
        vocab = self.lex.vocab
        return {
            "tokens": vocab.decode(seq),
            "grounded_objects": sorted(vocab.name_of(t) for t in context.grounded_objects),
            "split": context.split.value,
        }

    def __call__(self, seq: Sequence[int], context: Context) -> JudgeVerdict:
        payload = json.dumps(self.request(seq, context), sort_keys=True)
        try:
            result = subprocess.run(
                self.command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise JudgeFailed(f"Judge command {self.command[0]!r} could not run: {e}") from e
        if result.returncode != 0:
            raise JudgeFailed(
                f"Judge command exited with {result.returncode}: {result.stderr.strip()}"
            )
        try:
            return JudgeVerdict.from_dict(json.loads(result.stdout), self.lex)
        except (ValueError, KeyError, TypeError) as e:
            logger.error(f"Unreadable judge output: {result.stdout!r}")
            raise JudgeFailed(f"Judge returned an unreadable verdict: {e}") from e
