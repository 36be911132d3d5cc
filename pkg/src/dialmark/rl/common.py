"""Pieces shared by the learners: exploration schedule, transitions, greedy choice."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

TRAIN = "train"
TEST = "test"


class EmptyMaskError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over ``horizon`` dialogues, then flat."""

    start: float = 0.5
    end: float = 0.05
    horizon: int = 4000

    def __call__(self, dialogue: int) -> float:
        if self.horizon <= 0 or dialogue >= self.horizon:
            return self.end
        frac = max(dialogue, 0) / self.horizon
        return self.start + (self.end - self.start) * frac


@dataclass
class Transition:
    b: np.ndarray
    a: int
    r: float
    b_next: Optional[np.ndarray]
    mask_next: Optional[np.ndarray]

    @property
    def terminal(self) -> bool:
        return self.b_next is None


def masked_argmax(q: np.ndarray, mask: np.ndarray) -> int:
    """Greedy action among allowed ones; ties go to the lowest index."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("no action is allowed")
    return int(np.argmax(np.where(mask, q, -np.inf)))


def uniform_allowed(mask: np.ndarray, rng: np.random.Generator) -> int:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise EmptyMaskError("no action is allowed")
    return int(idx[rng.integers(len(idx))])


def select_action(learner, belief_vector, mask, phase: str, rng: np.random.Generator) -> int:
    """Dispatch to the learner's own train/test action rule."""
    return learner.select_action(np.asarray(belief_vector, dtype=float), np.asarray(mask, dtype=bool), phase, rng)
