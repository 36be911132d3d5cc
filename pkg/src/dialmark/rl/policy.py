"""Adapter that lets a learner drive dialogues through the episode engine."""

from __future__ import annotations

import numpy as np

from ..belief import PLAIN, featurize
from ..engine import ActionMask, DialogueState, EpisodeRecord, Policy, bind_action
from .common import TEST, TRAIN, Transition


class LearnerPolicy(Policy):
    """Wraps a DQN or GP-SARSA learner.

    In the training phase every turn is fed back to the learner: DQN learns
    from each transition at once, GP-SARSA waits for the next chosen action.
    In the test phase the learner is only queried.
    """

    def __init__(self, learner, feature_mode: str = PLAIN, phase: str = TRAIN):
        self.learner = learner
        self.feature_mode = feature_mode
        self.phase = phase
        self.name = learner.kind
        self._sarsa = learner.kind == "GP"
        self._x = None
        self._a = None
        self._pending: Transition | None = None

    @property
    def training(self) -> bool:
        return self.phase == TRAIN

    def freeze(self) -> None:
        self.phase = TEST

    def reset(self, state: DialogueState, rng: np.random.Generator) -> None:
        self._x = None
        self._a = None
        self._pending = None

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator):
        x = featurize(state.belief, self.feature_mode)
        a = self.learner.select_action(x, mask.allowed, self.phase, rng)
        if self._pending is not None:
            self.learner.observe(self._pending, next_action=a)
            self._pending = None
        self._x, self._a = x, a
        return bind_action(a, state.belief)

    def observe(self, reward: float, state: DialogueState, mask: ActionMask, done: bool) -> None:
        if not self.training:
            return
        if done:
            t = Transition(self._x, self._a, float(reward), None, None)
        else:
            t = Transition(self._x, self._a, float(reward), featurize(state.belief, self.feature_mode), mask.allowed.copy())
        if self._sarsa and not done:
            self._pending = t
        else:
            self.learner.observe(t)

    def end_episode(self, record: EpisodeRecord) -> None:
        if self.training:
            self.learner.end_episode()
