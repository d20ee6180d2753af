"""Generic state machine with validated transitions and observers."""

import logging
from enum import Enum
from typing import Callable, Generic, TypeVar

logger = logging.getLogger(__name__)

S = TypeVar("S", bound=Enum)

Observer = Callable[[S, S], None]


class StateMachine(Generic[S]):
    """Moves between the states of an enum along a fixed transition table.

    Observers see every accepted transition as ``(old, new)``. An observer
    that raises is logged and ignored; the transition stands.
    """

    def __init__(self, initial_state: S, transitions: dict[S, set[S]]):
        self._state: S = initial_state
        self._transitions = transitions
        self._observers: list[Observer] = []

    @property
    def state(self) -> S:
        return self._state

    @property
    def is_terminal(self) -> bool:
        return not self._transitions.get(self._state)

    def can_transition(self, to: S) -> bool:
        return to in self._transitions.get(self._state, set())

    def transition(self, to: S) -> bool:
        """Move to ``to``; False (and no change) when the table forbids it."""
        if not self.can_transition(to):
            logger.debug(f"Rejected transition {self._state.value} -> {to.value}")
            return False
        old, self._state = self._state, to
        for observer in self._observers:
            try:
                observer(old, to)
            except Exception as e:
                logger.warning(f"State observer failed on {old.value} -> {to.value}: {e!r}")
        return True

    def on_transition(self, observer: Observer) -> None:
        self._observers.append(observer)
