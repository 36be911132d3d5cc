"""Reinforcement learners for the dialogue manager."""

from .common import TEST, TRAIN, EpsilonSchedule, Transition, masked_argmax, select_action
from .dqn import DQNConfig, DQNLearner
from .gp import GPConfig, GPSarsaLearner
from .policy import LearnerPolicy

LEARNERS = {"DQN": DQNLearner, "GP": GPSarsaLearner}


def make_learner(kind: str, n_features: int, n_actions: int, rng, config=None):
    cls = LEARNERS[kind]
    return cls(n_features, n_actions, rng) if config is None else cls(n_features, n_actions, rng, config)


def load_learner(path):
    import json

    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return LEARNERS[d["kind"]].from_state_dict(d)
