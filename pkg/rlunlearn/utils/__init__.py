"""Utility classes for rlunlearn."""

from rlunlearn.utils.seeding import derive_rng, mix
from rlunlearn.utils.serializer import ArtifactFormat, ArtifactSerializer
from rlunlearn.utils.state_machine import StateMachine

__all__ = ["StateMachine", "ArtifactSerializer", "ArtifactFormat", "mix", "derive_rng"]
