"""Personalization wrappers: which policy serves a user, and what it gets to see.

Three modes are supported:

* ``v``  one policy for everybody, context withheld;
* ``s``  one policy per user segment, context used only for routing;
* ``bs`` one policy for everybody, context appended to the belief features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .belief import PLAIN, WITH_CONTEXT, Belief, featurize, layout_for
from .engine import EpisodeRecord, action_space, run_episode
from .environments import EnvironmentConfig
from .ontology import ItemSet
from .rl import LearnerPolicy, make_learner
from .rng import substream
from .usersim import (
    EXPERT,
    LAYPERSON,
    ConfigurationError,
    ErrorModel,
    ProfileSampler,
    UserContext,
    UserFactory,
)

VANILLA = "v"
SEGMENTED = "s"
BELIEF_STATE = "bs"
MODES = (VANILLA, SEGMENTED, BELIEF_STATE)

FEATURE_MODE = {VANILLA: PLAIN, SEGMENTED: PLAIN, BELIEF_STATE: WITH_CONTEXT}


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ConfigurationError(f"unknown personalization mode {mode!r}; expected one of {MODES}")
    return mode


@dataclass(frozen=True)
class SegmentationMap:
    """Maps a one-hot context vector to a segment name."""

    table: Mapping[tuple[float, float], str] = field(
        default_factory=lambda: {(1.0, 0.0): LAYPERSON, (0.0, 1.0): EXPERT}
    )

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.table.values()))

    def __call__(self, context) -> str:
        vec = context.vector if isinstance(context, UserContext) else context
        key = tuple(float(v) for v in vec)
        try:
            return self.table[key]
        except KeyError:
            raise ConfigurationError(f"context {key} has no segment") from None


IDENTITY_SEGMENTATION = SegmentationMap()


@dataclass
class PolicySet:
    """Policies owned by one benchmark cell, keyed by segment (``None`` for a single policy)."""

    mode: str
    policies: dict
    segmentation: SegmentationMap = IDENTITY_SEGMENTATION

    def __post_init__(self):
        check_mode(self.mode)
        expected = set(self.segmentation.segments) if self.mode == SEGMENTED else {None}
        if set(self.policies) != expected:
            raise ConfigurationError(
                f"mode {self.mode!r} needs policies for {sorted(map(str, expected))}, got {sorted(map(str, self.policies))}"
            )

    def freeze(self) -> None:
        for p in self.policies.values():
            if hasattr(p, "freeze"):
                p.freeze()

    def __iter__(self):
        return iter(self.policies.values())


def route(mode: str, context, policies: PolicySet):
    """Return ``(policy, feature mode)`` serving a user with this context."""
    check_mode(mode)
    if mode != policies.mode:
        raise ConfigurationError(f"policy set was built for mode {policies.mode!r}, not {mode!r}")
    if mode == SEGMENTED:
        return policies.policies[policies.segmentation(context)], PLAIN
    # Still validate the context so a malformed vector fails the same way in every mode.
    policies.segmentation(context)
    return policies.policies[None], FEATURE_MODE[mode]


def feature_size(domain: ItemSet, mode: str) -> int:
    return layout_for(domain).feature_size(FEATURE_MODE[check_mode(mode)])


def make_learner_policies(
    mode: str,
    algorithm: str,
    domain: ItemSet,
    seed: int,
    config=None,
    segmentation: SegmentationMap = IDENTITY_SEGMENTATION,
) -> PolicySet:
    """Fresh learners for a cell; segment learners get independent initialisation streams."""
    check_mode(mode)
    n_features = feature_size(domain, mode)
    n_actions = action_space(domain).size
    fm = FEATURE_MODE[mode]
    keys = segmentation.segments if mode == SEGMENTED else (None,)
    policies = {}
    for key in keys:
        rng = substream(seed, "learner", algorithm, key or "all")
        policies[key] = LearnerPolicy(make_learner(algorithm, n_features, n_actions, rng, config), fm)
    return PolicySet(mode, policies, segmentation)


def shared_policies(policy, segmentation: SegmentationMap = IDENTITY_SEGMENTATION) -> PolicySet:
    """Wrap a context-blind policy (a baseline) as a vanilla policy set."""
    return PolicySet(VANILLA, {None: policy}, segmentation)


@dataclass
class TrainedCell:
    policies: PolicySet
    train_rewards: list[int]
    segment_counts: dict[str, int]
    records: list[EpisodeRecord] = field(default_factory=list, repr=False)


def play(
    policies: PolicySet,
    factory: UserFactory,
    env: EnvironmentConfig,
    n: int,
    seed: int,
    phase: str,
    tracker=None,
    keep_records: bool = False,
):
    """Run ``n`` dialogues with fresh users, routing each to its policy.

    Users, goals, channel noise and policy randomness come from separate named
    streams of ``seed`` so that a phase is reproducible on its own.
    """
    g, u, c, p = (substream(seed, phase, name) for name in ("goal", "user", "channel", "policy"))
    records = []
    rewards = []
    counts: dict[str, int] = {}
    kwargs = {} if tracker is None else {"tracker": tracker}
    for _ in range(n):
        user = factory.new_user(g, u, c)
        policy, _ = route(policies.mode, user.context, policies)
        rec = run_episode(policy, user, env, p, **kwargs)
        rewards.append(rec.return_)
        seg = policies.segmentation(user.context)
        counts[seg] = counts.get(seg, 0) + 1
        if keep_records:
            records.append(rec)
    return rewards, counts, records


def train_cell(
    mode: str,
    algorithm: str,
    env: EnvironmentConfig,
    domain: ItemSet,
    n_train: int = 4000,
    seed: int = 0,
    factory: UserFactory | None = None,
    config=None,
    tracker=None,
) -> TrainedCell:
    """Train a learner policy set for one cell and return it frozen."""
    policies = make_learner_policies(mode, algorithm, domain, seed, config)
    factory = factory or default_factory(domain, env)
    rewards, counts, records = play(policies, factory, env, n_train, seed, "train", tracker)
    policies.freeze()
    return TrainedCell(policies, rewards, counts, records)


def default_factory(domain: ItemSet, env: EnvironmentConfig) -> UserFactory:
    return UserFactory(domain, ErrorModel(env.error_rate), ProfileSampler(env.user_model))


def learner_input(belief: Belief, mode: str) -> np.ndarray:
    """The vector a learner in ``mode`` would receive for ``belief``."""
    return featurize(belief, FEATURE_MODE[check_mode(mode)])
