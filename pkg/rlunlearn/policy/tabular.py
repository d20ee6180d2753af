"""Tabular autoregressive softmax policy.

Logits are indexed ``[condition][state][token]``. With ``markov`` history the
state is the previous token (the begin-of-sequence marker at position one);
with ``full`` history every prefix has its own state. Token 0 is the marker
and is masked out of every emission row.
"""

import logging
from functools import cached_property
from typing import AbstractSet, Sequence

import numpy as np
from scipy.special import log_softmax

from rlunlearn.concepts.lexicon import BOS_ID, Vocabulary
from rlunlearn.errors import EnumerationTooLarge, InvalidSequence, SupportMismatch
from rlunlearn.policy.distribution import EnumeratedDistribution, distribution_kl

logger = logging.getLogger(__name__)

HISTORIES = ("markov", "full")
DEFAULT_ENUMERATION_CAP = 1_000_000


def transition_table(vocab_size: int, length: int, history: str = "markov") -> np.ndarray:
    """``next_state[s, w]``: state after emitting ``w`` in state ``s``; -1 where undefined."""
    if history == "markov":
        table = np.tile(np.arange(vocab_size, dtype=np.int64), (vocab_size, 1))
        table[:, BOS_ID] = -1
        return table
    if history != "full":
        raise ValueError(f"Unknown policy history: {history}")
    if length > 3:
        raise ValueError("full-history policies support length <= 3")
    emit = vocab_size - 1
    offsets = np.cumsum([0] + [emit**k for k in range(length)])
    table = np.full((int(offsets[-1]), vocab_size), -1, dtype=np.int64)
    for depth in range(length - 1):
        for local in range(emit**depth):
            state = offsets[depth] + local
            table[state, 1:] = offsets[depth + 1] + local * emit + np.arange(emit)
    return table


class TabularPolicy:
    """Immutable conditional softmax tables.

    Updates produce new instances via :meth:`with_logits`, so a policy object
    can be shared freely between rollout workers.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        conditions: Sequence[str],
        length: int,
        logits: np.ndarray,
        history: str = "markov",
    ):
        if length < 1:
            raise ValueError("sequence length must be positive")
        self.vocab = vocab
        self.length = int(length)
        self.history = history
        self.conditions: tuple[str, ...] = tuple(conditions)
        self._index = {c: i for i, c in enumerate(self.conditions)}
        if len(self._index) != len(self.conditions):
            raise ValueError("duplicate condition keys")
        self.next_state = transition_table(vocab.size, self.length, history)
        self.next_state.setflags(write=False)

        expected = (len(self.conditions), self.next_state.shape[0], vocab.size)
        arr = np.array(logits, dtype=np.float64)
        if arr.shape != expected:
            raise ValueError(f"logits shape {arr.shape} does not match {expected}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logits must be finite")
        arr[..., BOS_ID] = 0.0
        arr.setflags(write=False)
        self._logits = arr

    @property
    def logits(self) -> np.ndarray:
        return self._logits

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    @property
    def n_states(self) -> int:
        return int(self.next_state.shape[0])

    @property
    def vocab_size(self) -> int:
        return self.vocab.size

    def condition_index(self, condition: str) -> int:
        try:
            return self._index[condition]
        except KeyError:
            raise ValueError(f"Unknown policy condition: {condition!r}") from None

    def with_logits(self, logits: np.ndarray) -> "TabularPolicy":
        return TabularPolicy(self.vocab, self.conditions, self.length, logits, self.history)

    def same_space(self, other: "TabularPolicy") -> bool:
        return (
            self.vocab.tokens == other.vocab.tokens
            and self.length == other.length
            and self.history == other.history
            and self.conditions == other.conditions
        )

    @cached_property
    def _log_probs(self) -> np.ndarray:
        return _masked_log_softmax(self._logits)

    def log_prob_table(self, temperature: float = 1.0) -> np.ndarray:
        """Log-probabilities of shape (conditions, states, tokens)."""
        if temperature == 1.0:
            return self._log_probs
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        return _masked_log_softmax(self._logits / temperature)

    def rows(self, condition: str, temperature: float = 1.0) -> np.ndarray:
        """Log-probability rows (states, tokens) of one condition."""
        return self.log_prob_table(temperature)[self.condition_index(condition)]

    def __repr__(self) -> str:
        return (
            f"TabularPolicy(conditions={self.n_conditions}, states={self.n_states}, "
            f"vocab={self.vocab_size}, length={self.length}, history={self.history!r})"
        )


def _masked_log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.array(logits, dtype=np.float64)
    z[..., BOS_ID] = -np.inf
    out = log_softmax(z, axis=-1)
    out.setflags(write=False)
    return out


def _check_same_space(p: TabularPolicy, q: TabularPolicy) -> None:
    if not p.same_space(q):
        raise ValueError("policies do not share vocabulary, length, history and conditions")


def init_policy(
    vocab: Vocabulary,
    conditions: Sequence[str],
    length: int,
    init_scale: float,
    rng: np.random.Generator,
    history: str = "markov",
) -> TabularPolicy:
    """Logits drawn i.i.d. uniform in ``[-init_scale, init_scale]``; zero scale is uniform."""
    if init_scale < 0:
        raise ValueError("init_scale must be non-negative")
    shape = (len(conditions), transition_table(vocab.size, length, history).shape[0], vocab.size)
    if init_scale == 0:
        logits = np.zeros(shape)
    else:
        logits = rng.uniform(-init_scale, init_scale, size=shape)
    return TabularPolicy(vocab, conditions, length, logits, history)


def _validated(policy: TabularPolicy, seq: Sequence[int]) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.int64)
    if arr.shape != (policy.length,):
        raise InvalidSequence(f"sequence length {arr.size} != {policy.length}")
    if np.any(arr == BOS_ID):
        raise InvalidSequence("sequence contains the begin-of-sequence marker (probability 0)")
    if np.any((arr < 0) | (arr >= policy.vocab_size)):
        raise InvalidSequence("sequence contains ids outside the vocabulary")
    return arr


def token_log_probs(
    policy: TabularPolicy, condition: str, seq: Sequence[int], temperature: float = 1.0
) -> np.ndarray:
    """Per-position conditional log-probabilities of ``seq``."""
    arr = _validated(policy, seq)
    rows = policy.rows(condition, temperature)
    out = np.empty(policy.length)
    state = BOS_ID
    for t, w in enumerate(arr):
        out[t] = rows[state, w]
        state = policy.next_state[state, w]
    return out


def visited_states(policy: TabularPolicy, seq: Sequence[int]) -> np.ndarray:
    """State index at each position of ``seq``."""
    arr = _validated(policy, seq)
    states = np.empty(policy.length, dtype=np.int64)
    state = BOS_ID
    for t, w in enumerate(arr):
        states[t] = state
        state = policy.next_state[state, w]
    return states


def log_prob(policy: TabularPolicy, condition: str, seq: Sequence[int]) -> float:
    """Sequence log-probability.

    Raises:
        InvalidSequence: wrong length, or the reserved marker inside.
    """
    return float(token_log_probs(policy, condition, seq).sum())


def sample_batch(
    policy: TabularPolicy,
    condition: str,
    rng: np.random.Generator,
    n: int,
    temperature: float = 1.0,
) -> np.ndarray:
    """Draw ``n`` sequences at once; returns an (n, L) integer array."""
    probs = np.exp(policy.rows(condition, temperature))
    cdf = np.cumsum(probs, axis=1)
    out = np.empty((n, policy.length), dtype=np.int64)
    states = np.full(n, BOS_ID, dtype=np.int64)
    for t in range(policy.length):
        rows = cdf[states]
        u = rng.random(n) * rows[:, -1]
        tokens = np.minimum((rows <= u[:, None]).sum(axis=1), policy.vocab_size - 1)
        out[:, t] = tokens
        if t < policy.length - 1:
            states = policy.next_state[states, tokens]
    return out


def sample(
    policy: TabularPolicy, condition: str, rng: np.random.Generator, temperature: float = 1.0
) -> tuple[int, ...]:
    """Draw one sequence autoregressively."""
    return tuple(int(t) for t in sample_batch(policy, condition, rng, 1, temperature)[0])


def enumerate_distribution(
    policy: TabularPolicy,
    condition: str,
    cap: int = DEFAULT_ENUMERATION_CAP,
    temperature: float = 1.0,
) -> EnumeratedDistribution:
    """Every length-L sequence over emittable tokens with its probability.

    Raises:
        EnumerationTooLarge: more than ``cap`` sequences.
    """
    emit = policy.vocab_size - 1
    size = emit**policy.length
    if size > cap:
        raise EnumerationTooLarge(size, cap)
    rows = policy.rows(condition, temperature)
    digits = np.unravel_index(np.arange(size), (emit,) * policy.length)
    seqs = np.stack(digits, axis=1).astype(np.int64) + 1
    lp = np.zeros(size)
    states = np.full(size, BOS_ID, dtype=np.int64)
    for t in range(policy.length):
        lp += rows[states, seqs[:, t]]
        if t < policy.length - 1:
            states = policy.next_state[states, seqs[:, t]]
    return EnumeratedDistribution(seqs, lp)


def kl_divergence(
    p: TabularPolicy, q: TabularPolicy, condition: str, cap: int = DEFAULT_ENUMERATION_CAP
) -> float:
    """Exact sequence-level KL(p || q) by enumeration.

    Raises:
        EnumerationTooLarge: the sequence space exceeds ``cap``.
        SupportMismatch: q assigns zero where p does not.
    """
    _check_same_space(p, q)
    return distribution_kl(
        enumerate_distribution(p, condition, cap), enumerate_distribution(q, condition, cap)
    )


def state_marginals(policy: TabularPolicy, condition: str, temperature: float = 1.0) -> np.ndarray:
    """Probability of being in each state at each position, shape (L, S)."""
    probs = np.exp(policy.rows(condition, temperature))
    return _forward(probs, policy.next_state, policy.length)


def _forward(probs: np.ndarray, next_state: np.ndarray, length: int) -> np.ndarray:
    n_states = probs.shape[0]
    valid = next_state >= 0
    marginals = np.zeros((length, n_states))
    marginals[0, BOS_ID] = 1.0
    for t in range(length - 1):
        flow = marginals[t][:, None] * probs
        np.add.at(marginals[t + 1], next_state[valid], flow[valid])
    return marginals


def kl_and_gradient(p: TabularPolicy, q: TabularPolicy, condition: str) -> tuple[float, np.ndarray]:
    """Exact KL(p || q) and its gradient w.r.t. p's logits for one condition.

    Runs a backward recursion over states, so the cost is linear in L and
    independent of the size of the sequence space.

    Returns:
        (kl, grad) with ``grad`` of shape (states, tokens).
    """
    _check_same_space(p, q)
    lp = p.rows(condition)
    lq = q.rows(condition)
    probs = np.exp(lp)
    if np.any(np.isneginf(lq) & (probs > 0)):
        raise SupportMismatch("q assigns zero probability where p does not")
    with np.errstate(invalid="ignore"):
        d = np.where(probs > 0, lp - lq, 0.0)

    ns = p.next_state
    valid = ns >= 0
    safe_ns = np.where(valid, ns, 0)
    length = p.length
    marginals = _forward(probs, ns, length)

    grad = np.zeros_like(probs)
    value_next = np.zeros(p.n_states)
    for t in reversed(range(length)):
        q_values = d if t == length - 1 else d + np.where(valid, value_next[safe_ns], 0.0)
        value = (probs * q_values).sum(axis=1)
        grad += marginals[t][:, None] * probs * (q_values - value[:, None])
        value_next = value
    kl = float(value_next[BOS_ID])
    return max(kl, 0.0), grad


def sequence_kl(p: TabularPolicy, q: TabularPolicy, condition: str) -> float:
    """Exact KL(p || q) by dynamic programming; agrees with :func:`kl_divergence`."""
    return kl_and_gradient(p, q, condition)[0]


def containment_probability(
    policy: TabularPolicy,
    condition: str,
    token_ids: AbstractSet[int],
    temperature: float = 1.0,
) -> float:
    """Probability that a sampled sequence contains at least one of ``token_ids``."""
    probs = np.exp(policy.rows(condition, temperature))
    avoid = probs.copy()
    avoid[:, sorted(token_ids)] = 0.0
    ns = policy.next_state
    valid = ns >= 0
    alive = np.zeros(policy.n_states)
    alive[BOS_ID] = 1.0
    for _ in range(policy.length - 1):
        flow = alive[:, None] * avoid
        alive = np.zeros(policy.n_states)
        np.add.at(alive, ns[valid], flow[valid])
    escaped = float((alive[:, None] * avoid).sum())
    return min(max(1.0 - escaped, 0.0), 1.0)
