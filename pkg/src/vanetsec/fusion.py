"""Majority-vote fusion and malicious negation of +1/-1 messages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["TRUE", "FALSE", "Inbox", "majority_vote", "apply_malice", "fuse_counts"]

TRUE = 1
FALSE = -1


@dataclass(frozen=True)
class Inbox:
    """Counts of received copies; arrival order is deliberately not kept."""

    plus: int = 0
    minus: int = 0

    def __post_init__(self) -> None:
        if self.plus < 0 or self.minus < 0:
            raise ValueError("message counts must be non-negative")

    def receive(self, message: int) -> "Inbox":
        if message == TRUE:
            return Inbox(self.plus + 1, self.minus)
        if message == FALSE:
            return Inbox(self.plus, self.minus + 1)
        raise ValueError(f"messages are +1 or -1, got {message!r}")

    @property
    def size(self) -> int:
        return self.plus + self.minus

    @property
    def tied(self) -> bool:
        return self.plus == self.minus


@njit(cache=True)
def fuse_counts(plus, minus, coin):
    """Majority of the counts; ``coin`` in [0, 1) settles ties (+1 below one half)."""
    if plus > minus:
        return 1
    if minus > plus:
        return -1
    return 1 if coin < 0.5 else -1


def majority_vote(inbox: Inbox, rng: np.random.Generator) -> int:
    """Fuse an inbox. An empty inbox counts as a tie.

    The generator is consulted only when the vote is tied.
    """
    if not inbox.tied:
        return TRUE if inbox.plus > inbox.minus else FALSE
    return int(fuse_counts(inbox.plus, inbox.minus, rng.random()))


def apply_malice(fused: int, is_malicious: bool) -> int:
    if fused not in (TRUE, FALSE):
        raise ValueError(f"messages are +1 or -1, got {fused!r}")
    return -fused if is_malicious else fused
