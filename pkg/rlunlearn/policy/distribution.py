"""Explicit distributions over fixed-length sequences."""

from dataclasses import dataclass
from typing import AbstractSet, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from rlunlearn.errors import SupportMismatch


@dataclass(frozen=True)
class EnumeratedDistribution:
    """Every sequence of the space with its log-probability.

    Attributes:
        sequences: Integer array of shape (N, L).
        log_probs: Array of shape (N,); ``-inf`` marks zero mass.
    """

    sequences: np.ndarray
    log_probs: np.ndarray

    def __post_init__(self):
        if self.sequences.ndim != 2 or self.log_probs.shape != (self.sequences.shape[0],):
            raise ValueError("sequences must be (N, L) and log_probs (N,)")

    @classmethod
    def from_mapping(cls, probs: Mapping[Sequence[int], float]) -> "EnumeratedDistribution":
        """Build from explicit probabilities; keys must share one length."""
        keys = sorted(tuple(int(t) for t in k) for k in probs)
        seqs = np.array(keys, dtype=np.int64)
        with np.errstate(divide="ignore"):
            lp = np.log(np.array([float(probs[k]) for k in keys]))
        return cls(seqs, lp)

    @property
    def size(self) -> int:
        return int(self.sequences.shape[0])

    @property
    def length(self) -> int:
        return int(self.sequences.shape[1])

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def total_mass(self) -> float:
        return float(np.exp(logsumexp(self.log_probs)))

    def contains_mask(self, token_ids: AbstractSet[int]) -> np.ndarray:
        """Boolean mask of sequences containing any token of ``token_ids``."""
        if not token_ids:
            return np.zeros(self.size, dtype=bool)
        return np.isin(self.sequences, np.fromiter(token_ids, dtype=np.int64)).any(axis=1)

    def mass_where(self, mask: np.ndarray) -> float:
        if not mask.any():
            return 0.0
        return float(np.exp(logsumexp(self.log_probs[mask])))

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(t) for t in s): float(p) for s, p in zip(self.sequences, self.probs)}

    def prob_of(self, seq: Sequence[int]) -> float:
        target = np.asarray(seq, dtype=np.int64)
        hits = np.flatnonzero((self.sequences == target).all(axis=1))
        return float(np.exp(self.log_probs[hits[0]])) if hits.size else 0.0


def distribution_kl(p: EnumeratedDistribution, q: EnumeratedDistribution) -> float:
    """KL(p || q) for two distributions over the same ordered sequence list.

    Raises:
        SupportMismatch: q has zero mass where p does not.
    """
    if p.sequences.shape != q.sequences.shape or not np.array_equal(p.sequences, q.sequences):
        raise ValueError("distributions are not over the same sequences")
    support = np.isfinite(p.log_probs)
    if np.any(support & ~np.isfinite(q.log_probs)):
        raise SupportMismatch("q assigns zero probability where p does not")
    lp = p.log_probs[support]
    kl = float(np.sum(np.exp(lp) * (lp - q.log_probs[support])))
    return max(kl, 0.0)
