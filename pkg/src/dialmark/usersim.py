"""Context-conditioned simulated user and its semantic error channel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .acts import (
    AFFIRM,
    BYE,
    CONFIRM,
    DENY,
    INFORM,
    NULL,
    RECOMMEND,
    REQUEST,
    SELECT,
    SystemAct,
    UserAct,
)
from .environments import NORMAL, UNFRIENDLY
from .ontology import Item, ItemSet, filter_candidates

LAYPERSON = "layperson"
EXPERT = "expert"
GROUPS = (LAYPERSON, EXPERT)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class UserContext:
    group: str

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"unknown user group {self.group!r}")

    @property
    def vector(self) -> tuple[float, float]:
        return (1.0, 0.0) if self.group == LAYPERSON else (0.0, 1.0)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "UserContext":
        vec = tuple(float(v) for v in vec)
        if vec == (1.0, 0.0):
            return cls(LAYPERSON)
        if vec == (0.0, 1.0):
            return cls(EXPERT)
        raise ValueError(f"context vector must be one-hot, got {vec}")


def sample_context(rng: np.random.Generator) -> UserContext:
    """Layperson or expert with equal probability."""
    return UserContext(GROUPS[int(rng.integers(2))])


@dataclass(frozen=True)
class UserGoal:
    constraints: dict[str, str]
    seed_item: Item
    target_ids: frozenset[str]

    def satisfied_by(self, item_id: str) -> bool:
        return item_id in self.target_ids


def sample_goal(domain: ItemSet, context: UserContext, rng: np.random.Generator) -> UserGoal:
    """Draw a seed item, then read 1-3 (layperson) or 3 (expert) constraints off it."""
    group1 = [s.name for s in domain.group1_slots]
    if context.group == LAYPERSON:
        if not group1:
            raise ConfigurationError(f"domain {domain.name!r} has no slots usable by laypersons")
        eligible = group1
        n = int(rng.integers(1, min(3, len(eligible)) + 1))
    else:
        eligible = [s.name for s in domain.constrainable_slots]
        n = min(3, len(eligible))
    seed_item = domain.items[int(rng.integers(len(domain)))]
    chosen = sorted(rng.choice(len(eligible), size=n, replace=False))
    constraints = {eligible[i]: seed_item.assignment[eligible[i]] for i in chosen}
    targets = frozenset(it.id for it in filter_candidates(domain, constraints))
    return UserGoal(constraints=constraints, seed_item=seed_item, target_ids=targets)


@dataclass(frozen=True)
class BehaviorProfile:
    p_volunteer: float = 0.3
    p_repeat: float = 0.1
    patience: int = 5
    unfriendly: bool = False
    p_null_substitution: float = 0.0

    def __post_init__(self):
        for name in ("p_volunteer", "p_repeat", "p_null_substitution"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


UNFRIENDLY_PROFILE = BehaviorProfile(p_volunteer=0.0, unfriendly=True, p_null_substitution=0.4)


@dataclass(frozen=True)
class ProfileSampler:
    """Distribution over behaviour profiles; one profile is drawn per dialogue."""

    user_model: str = NORMAL
    p_volunteer: tuple[float, float] = (0.2, 0.4)
    p_repeat: tuple[float, float] = (0.05, 0.15)
    patience: tuple[int, ...] = (4, 5, 6)
    p_null_substitution: float = 0.4

    def sample(self, rng: np.random.Generator) -> BehaviorProfile:
        p_repeat = float(rng.uniform(*self.p_repeat))
        patience = int(self.patience[int(rng.integers(len(self.patience)))])
        if self.user_model == UNFRIENDLY:
            return BehaviorProfile(
                p_volunteer=0.0,
                p_repeat=p_repeat,
                patience=patience,
                unfriendly=True,
                p_null_substitution=self.p_null_substitution,
            )
        return BehaviorProfile(
            p_volunteer=float(rng.uniform(*self.p_volunteer)),
            p_repeat=p_repeat,
            patience=patience,
        )


@dataclass(frozen=True)
class ErrorModel:
    """Semantic error channel; confidences are Beta distributed."""

    error_rate: float = 0.0
    confidence_correct: tuple[float, float] = (8.0, 2.0)
    confidence_corrupted: tuple[float, float] = (5.0, 5.0)

    def __post_init__(self):
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError(f"error_rate {self.error_rate} outside [0, 1]")


def corrupt(act: UserAct, model: ErrorModel, domain: ItemSet, rng: np.random.Generator) -> UserAct:
    """Observed version of a true act.

    With probability ``1 - error_rate`` the act passes through; otherwise an
    inform gets a different value of the same slot, affirm and deny swap, and
    anything else becomes a null response.
    """
    u = rng.random()
    if u >= model.error_rate:
        return act.with_confidence(float(rng.beta(*model.confidence_correct)))
    conf = float(rng.beta(*model.confidence_corrupted))
    if act.kind == INFORM:
        values = domain.slot(act.slot).values
        if len(values) < 2:
            return act.with_confidence(conf)
        j = values.index(act.value)
        k = int(rng.integers(len(values) - 1))
        return UserAct(INFORM, act.slot, values[k if k < j else k + 1], conf)
    if act.kind == AFFIRM:
        return UserAct(DENY, confidence=conf)
    if act.kind == DENY:
        return UserAct(AFFIRM, confidence=conf)
    return UserAct(NULL, confidence=conf)


class SimulatedUser:
    """One simulated user for one dialogue.

    ``respond`` returns the true acts of a user turn (an inform may be followed
    by a volunteered extra inform). ``hung_up`` is set once the user runs out of
    patience; ``done`` once the user has said bye for any reason.
    """

    def __init__(
        self,
        domain: ItemSet,
        goal: UserGoal,
        context: UserContext,
        profile: BehaviorProfile,
        error_model: ErrorModel,
        rng: np.random.Generator,
        channel_rng: np.random.Generator,
    ):
        self.domain = domain
        self.goal = goal
        self.context = context
        self.profile = profile
        self.error_model = error_model
        self.rng = rng
        self.channel_rng = channel_rng
        self.stated: set[str] = set()
        self.previous: tuple[UserAct, ...] = ()
        self.unhappy_turns = 0
        self.hung_up = False
        self.done = False

    def respond(self, act: SystemAct) -> tuple[UserAct, ...]:
        acts = respond(self.goal, self.profile, act, self.stated, self.previous, self.rng)
        if all(a.kind in (NULL, DENY) for a in acts):
            self.unhappy_turns += 1
        else:
            self.unhappy_turns = 0
        if self.unhappy_turns >= self.profile.patience and not any(a.kind == BYE for a in acts):
            acts = (UserAct(BYE),)
            self.hung_up = True
        for a in acts:
            if a.kind == INFORM:
                self.stated.add(a.slot)
        if any(a.kind == BYE for a in acts):
            self.done = True
        self.previous = acts
        return acts

    def observe(self, acts: Sequence[UserAct]) -> tuple[UserAct, ...]:
        return tuple(corrupt(a, self.error_model, self.domain, self.channel_rng) for a in acts)


def respond(
    goal: UserGoal,
    profile: BehaviorProfile,
    last_system_act: SystemAct,
    stated: set[str] | frozenset[str] = frozenset(),
    previous: Sequence[UserAct] = (),
    rng: np.random.Generator | None = None,
) -> tuple[UserAct, ...]:
    """True user acts in reply to ``last_system_act``.

    ``stated`` holds the slots already informed in this dialogue and
    ``previous`` the user's last turn; both are part of the dialogue so far.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    c = goal.constraints
    act = last_system_act
    kind = act.kind
    out: list[UserAct]
    if kind == REQUEST:
        if act.slot in c:
            out = [UserAct(INFORM, act.slot, c[act.slot])]
            unstated = [s for s in c if s != act.slot and s not in stated]
            if unstated and not profile.unfriendly and rng.random() < profile.p_volunteer:
                extra = unstated[int(rng.integers(len(unstated)))]
                out.append(UserAct(INFORM, extra, c[extra]))
        else:
            out = [UserAct(NULL)]
    elif kind == CONFIRM:
        if act.slot not in c:
            out = [UserAct(NULL)]
        else:
            out = [UserAct(AFFIRM if c[act.slot] == act.values[0] else DENY)]
    elif kind == SELECT:
        match = [v for v in act.values if c.get(act.slot) == v]
        out = [UserAct(INFORM, act.slot, match[0])] if match else [UserAct(NULL)]
    elif kind == RECOMMEND:
        out = [UserAct(BYE if goal.satisfied_by(act.item) else DENY)]
    else:
        out = [UserAct(BYE)]

    if out[0].kind == NULL and previous and kind != BYE and rng.random() < profile.p_repeat:
        # A confused user repeats the previous turn instead of answering.
        if previous[0].kind != BYE:
            out = list(previous)
    if profile.unfriendly:
        out = [
            UserAct(NULL) if a.kind == INFORM and rng.random() < profile.p_null_substitution else a
            for a in out
        ]
    return tuple(a.with_confidence(1.0) for a in out)


@dataclass
class UserFactory:
    """Creates a fresh simulated user per dialogue from named random streams."""

    domain: ItemSet
    error_model: ErrorModel = field(default_factory=ErrorModel)
    profiles: ProfileSampler = field(default_factory=ProfileSampler)

    def new_user(
        self,
        goal_rng: np.random.Generator,
        user_rng: np.random.Generator,
        channel_rng: np.random.Generator,
        context: UserContext | None = None,
    ) -> SimulatedUser:
        if context is None:
            context = sample_context(goal_rng)
        goal = sample_goal(self.domain, context, goal_rng)
        profile = self.profiles.sample(goal_rng)
        return SimulatedUser(
            self.domain, goal, context, profile, self.error_model, user_rng, channel_rng
        )

