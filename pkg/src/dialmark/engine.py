"""Turn-based episode engine, reward and action masks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .acts import (
    BYE,
    CONFIRM,
    RECOMMEND,
    REQUEST,
    SELECT,
    ActionSpace,
    SystemAct,
    UserAct,
)
from .belief import DEFAULT_TRACKER, Belief, TrackerConfig, update
from .environments import EnvironmentConfig
from .ontology import ItemSet

SUCCESS_REWARD = 20
TURN_PENALTY = 1
OBSERVED_MASS_THRESHOLD = 0.01


class MaskViolation(RuntimeError):
    """A policy chose an action that the current action mask forbids."""


_SPACES: dict[int, ActionSpace] = {}


def action_space(domain: ItemSet) -> ActionSpace:
    space = _SPACES.get(id(domain))
    if space is None or space.domain is not domain:
        space = _SPACES[id(domain)] = ActionSpace(domain)
    return space


@dataclass(frozen=True)
class ActionMask:
    allowed: np.ndarray

    def __post_init__(self):
        if not self.allowed.any():
            raise ValueError("an action mask must allow at least one action")

    def __getitem__(self, index: int) -> bool:
        return bool(self.allowed[index])

    def __len__(self) -> int:
        return len(self.allowed)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.allowed)


def build_action_mask(belief: Belief, turn: int, env: EnvironmentConfig) -> ActionMask:
    """Legal summary actions at ``turn``.

    With masks enabled, confirm/select on a slot need observed value mass above
    0.01 and recommending is blocked on the first turn. Requests and bye are
    always allowed.
    """
    space = action_space(belief.domain)
    allowed = np.ones(space.size, dtype=bool)
    if env.masks:
        k = space.n_slots
        for i, name in enumerate(space.slot_names):
            if belief.observed_mass(name) <= OBSERVED_MASS_THRESHOLD:
                allowed[k + i] = False
                allowed[2 * k + i] = False
        if turn == 0:
            allowed[space.recommend_index] = False
    return ActionMask(allowed)


def bind_action(index: int, belief: Belief) -> SystemAct:
    """Concrete system act for a summary action, resolved against the belief."""
    space = action_space(belief.domain)
    kind, slot = space.describe(index)
    if kind == REQUEST:
        return SystemAct.request(slot)
    if kind == CONFIRM:
        return SystemAct.confirm(slot, belief.top_value(slot)[0])
    if kind == SELECT:
        return SystemAct.select(slot, *belief.top_two_values(slot))
    if kind == RECOMMEND:
        return SystemAct.recommend(belief.domain.items[belief.candidate_indices()[0]].id)
    return SystemAct.bye()


@dataclass(frozen=True)
class Turn:
    index: int
    system_act: SystemAct
    observed: tuple[UserAct, ...]
    true: tuple[UserAct, ...]
    belief: Belief | None = field(default=None, compare=False, repr=False)
    mask: ActionMask | None = field(default=None, compare=False, repr=False)


@dataclass
class DialogueState:
    """What a policy may see: the current belief and the observed history."""

    belief: Belief
    history: list[tuple[SystemAct, tuple[UserAct, ...]]] = field(default_factory=list)

    @property
    def turn(self) -> int:
        return len(self.history)

    @property
    def domain(self) -> ItemSet:
        return self.belief.domain


@dataclass
class EpisodeRecord:
    turns: list[Turn]
    target_ids: frozenset[str]
    group: str = ""
    hung_up: bool = False

    @property
    def length(self) -> int:
        return len(self.turns)

    @property
    def success(self) -> bool:
        return any(
            t.system_act.kind == RECOMMEND and t.system_act.item in self.target_ids
            for t in self.turns
        )

    @property
    def return_(self) -> int:
        return compute_reward(self)

    def transcript_lines(self) -> Iterable[str]:
        for t in self.turns:
            yield json.dumps(
                {
                    "turn": t.index,
                    "system_act": t.system_act.to_dict(),
                    "true_user_act": [a.to_dict() for a in t.true],
                    "observed_user_act": [a.to_dict() for a in t.observed],
                    "confidence": [round(a.confidence, 6) for a in t.observed],
                },
                sort_keys=True,
            )

    def write_transcript(self, fh: IO[str]) -> None:
        for line in self.transcript_lines():
            fh.write(line + "\n")


def compute_reward(record: EpisodeRecord) -> int:
    """20 if some recommendation hit the target set, minus one per system turn."""
    return SUCCESS_REWARD * int(record.success) - TURN_PENALTY * record.length


def decompose_reward(turns: Sequence[Turn], target_ids: frozenset[str], finished: bool = True) -> list[int]:
    """Per-turn rewards whose sum is the episode return."""
    stream = [-TURN_PENALTY] * len(turns)
    if finished and turns:
        hit = any(t.system_act.kind == RECOMMEND and t.system_act.item in target_ids for t in turns)
        if hit:
            stream[-1] += SUCCESS_REWARD
    return stream


def read_transcript(lines: Iterable[str]) -> list[tuple[SystemAct, list[UserAct], list[UserAct]]]:
    out = []
    for line in lines:
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            (
                SystemAct.from_dict(d["system_act"]),
                [UserAct.from_dict(a) for a in d["true_user_act"]],
                [UserAct.from_dict(a) for a in d["observed_user_act"]],
            )
        )
    return out


class Policy:
    """Base policy: picks a concrete system act from the dialogue state.

    Learners override :meth:`observe` and :meth:`end_episode`.
    """

    name = "policy"

    def reset(self, state: DialogueState, rng: np.random.Generator) -> None:
        pass

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator) -> SystemAct:
        raise NotImplementedError

    def observe(
        self, reward: float, state: DialogueState, mask: ActionMask, done: bool
    ) -> None:
        pass

    def end_episode(self, record: EpisodeRecord) -> None:
        pass


def run_episode(
    policy: Policy,
    user,
    env: EnvironmentConfig,
    rng: np.random.Generator,
    tracker: TrackerConfig = DEFAULT_TRACKER,
    keep_beliefs: bool = False,
) -> EpisodeRecord:
    """Play one dialogue between ``policy`` and the simulated ``user``.

    The system speaks first. The episode ends when the user says bye (after a
    correct recommendation or on hanging up), when the system says bye, or at
    ``env.max_turns`` system turns.
    """
    domain = user.domain
    space = action_space(domain)
    belief = Belief.initial(domain, user.context.vector, env.max_turns, tracker)
    state = DialogueState(belief)
    policy.reset(state, rng)
    turns: list[Turn] = []
    mask = build_action_mask(belief, 0, env)
    for t in range(env.max_turns):
        act = policy.act(state, mask, rng)
        act.validate(domain)
        if not mask[space.index_of(act)]:
            raise MaskViolation(f"{policy.name} chose masked action {act} at turn {t}")
        true = user.respond(act)
        observed = user.observe(true)
        turns.append(
            Turn(t, act, observed, true, belief if keep_beliefs else None, mask if keep_beliefs else None)
        )
        success = act.kind == RECOMMEND and user.goal.satisfied_by(act.item)
        done = user.done or act.kind == BYE or t + 1 == env.max_turns
        belief = update(belief, act, observed)
        state.history.append((act, observed))
        state.belief = belief
        mask = build_action_mask(belief, t + 1, env)
        reward = -TURN_PENALTY + (SUCCESS_REWARD if (done and success) else 0)
        policy.observe(reward, state, mask, done)
        if done:
            break
    record = EpisodeRecord(
        turns=turns,
        target_ids=user.goal.target_ids,
        group=user.context.group,
        hung_up=user.hung_up,
    )
    policy.end_episode(record)
    return record
