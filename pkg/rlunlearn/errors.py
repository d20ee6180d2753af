"""Exception hierarchy for rlunlearn."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:
    from rlunlearn.oracle.closed_form import LemmaReport


class RLUnlearnError(Exception):
    """Base class for every error raised by rlunlearn."""


# --- lexicon ---


class UnknownToken(RLUnlearnError, ValueError):
    """A token name or id is not part of the vocabulary (or is reserved)."""

    def __init__(self, token: Any, reason: str = "not in vocabulary"):
        self.token = token
        super().__init__(f"Unknown token {token!r}: {reason}")


class OverlappingSets(RLUnlearnError, ValueError):
    """Two concept sets of a lexicon share a token."""

    def __init__(self, token: str, first: str, second: str):
        self.token = token
        self.sets = (first, second)
        super().__init__(f"Token {token!r} appears in both {first} and {second}")


# --- environment ---


class InsufficientConcepts(RLUnlearnError, ValueError):
    """The environment configuration cannot satisfy the split invariants."""


class TemplateLengthMismatch(RLUnlearnError, ValueError):
    """A caption template does not produce a sequence of the configured length."""


class EmptyReplacementPool(RLUnlearnError, ValueError):
    """Keyword replacement was asked to draw from an empty pool."""


# --- policy ---


class EmptyCorpus(RLUnlearnError, ValueError):
    """Maximum-likelihood fitting was given no records."""


class EnumerationTooLarge(RLUnlearnError, ValueError):
    """The sequence space exceeds the configured enumeration cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"Sequence space of size {size} exceeds enumeration cap {cap}")


class SupportMismatch(RLUnlearnError, ValueError):
    """The second distribution of a KL divergence has zeros where the first does not."""


class InvalidSequence(RLUnlearnError, ValueError):
    """A sequence has the wrong length or contains the reserved marker."""


class CheckpointMismatch(RLUnlearnError, ValueError):
    """A checkpoint was written for a different vocabulary or shape."""


# --- training ---


class GroupTooSmall(RLUnlearnError, ValueError):
    """Group-relative advantages need at least two rewards."""


# --- oracle ---


class DisjointnessViolation(RLUnlearnError, ValueError):
    """The hallucinated token set intersects the grounded objects."""


class PreconditionViolated(RLUnlearnError):
    """The hypothesis of the hallucination-reduction lemma does not hold.

    The report computed so far is attached so callers can inspect the values.
    """

    def __init__(self, message: str, report: Optional["LemmaReport"] = None):
        self.report = report
        super().__init__(message)


# --- evaluation ---


class EmptyOutputSet(RLUnlearnError, ValueError):
    """A metric was asked for over zero generations."""


class MissingExpectedConcept(RLUnlearnError, ValueError):
    """A retain context declares no expected retain keyword."""


class JudgeFailed(RLUnlearnError):
    """An external judge exited abnormally or returned an unreadable verdict."""


# --- pipeline ---


class ConfigError(RLUnlearnError, ValueError):
    """The experiment configuration failed validation."""


class MissingArtifact(RLUnlearnError, FileNotFoundError):
    """A stage input artifact does not exist on disk."""

    def __init__(self, path: Any):
        self.path = path
        super().__init__(f"Missing artifact: expected {path}")


class StageFailed(RLUnlearnError):
    """A pipeline stage raised; carries the stage name and the original error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage {stage!r} failed: {type(cause).__name__}: {cause}")


class AcceptanceFailed(RLUnlearnError):
    """One or more built-in acceptance checks did not pass."""

    def __init__(self, results: list):
        self.results = results
        failed = [r.name for r in results if not r.passed]
        super().__init__(f"Acceptance checks failed: {', '.join(failed)}")
