"""Factored agent belief: per-slot intention distributions, dialogue history, context.

The tracker is a rule-based focus update. Each constrainable slot carries a
distribution over its values plus a trailing ``none`` entry (the user has no
constraint on the slot). Beliefs are immutable; :func:`update` returns a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .acts import (
    AFFIRM,
    CONFIRM,
    DENY,
    INFORM,
    NULL,
    RECOMMEND,
    REQUEST,
    SYSTEM_ACT_KINDS,
    SystemAct,
    UserAct,
)
from .ontology import Item, ItemSet

PLAIN = "plain"
WITH_CONTEXT = "with_context"
FEATURE_MODES = (PLAIN, WITH_CONTEXT)


@dataclass(frozen=True)
class TrackerConfig:
    none_prior: float = 0.85
    accept_threshold: float = 0.5
    null_shift: float = 0.5


DEFAULT_TRACKER = TrackerConfig()


class BeliefLayout:
    """Offsets of every slot distribution inside the flat belief vector."""

    def __init__(self, domain: ItemSet):
        self.domain = domain
        self.slots = domain.constrainable_slots
        self.names = tuple(s.name for s in self.slots)
        self.sizes = tuple(len(s.values) for s in self.slots)
        offsets = np.cumsum([0] + [k + 1 for k in self.sizes])
        self.offsets = tuple(int(o) for o in offsets[:-1])
        self.none_index = tuple(o + k for o, k in zip(self.offsets, self.sizes))
        self.dist_size = int(offsets[-1])
        self.position = {n: i for i, n in enumerate(self.names)}
        # Flat index of every item's value on every slot, shape (n_items, n_slots).
        self.item_index = domain.codes + np.asarray(self.offsets)[None, :]
        self.item_position = {it.id: i for i, it in enumerate(domain.items)}
        self.history_size = len(SYSTEM_ACT_KINDS) + len(self.slots) + 3

    def feature_size(self, mode: str = PLAIN) -> int:
        return self.dist_size + self.history_size + (2 if mode == WITH_CONTEXT else 0)

    def fresh_dist(self, tracker: TrackerConfig) -> np.ndarray:
        dist = np.empty(self.dist_size)
        for o, k in zip(self.offsets, self.sizes):
            dist[o : o + k] = (1.0 - tracker.none_prior) / k
            dist[o + k] = tracker.none_prior
        return dist


_LAYOUTS: dict[int, BeliefLayout] = {}


def layout_for(domain: ItemSet) -> BeliefLayout:
    key = id(domain)
    lay = _LAYOUTS.get(key)
    if lay is None or lay.domain is not domain:
        lay = _LAYOUTS[key] = BeliefLayout(domain)
    return lay


@dataclass(frozen=True, eq=False)
class Belief:
    layout: BeliefLayout
    dist: np.ndarray
    context: np.ndarray
    last_act: int = -1
    requested: tuple[bool, ...] = ()
    recommended: bool = False
    rejected: frozenset[int] = frozenset()
    turn: int = 0
    max_turns: int = 25
    tracker: TrackerConfig = field(default=DEFAULT_TRACKER)

    @classmethod
    def initial(
        cls,
        domain: ItemSet,
        context: Sequence[float] = (0.0, 0.0),
        max_turns: int = 25,
        tracker: TrackerConfig = DEFAULT_TRACKER,
    ) -> "Belief":
        lay = layout_for(domain)
        ctx = np.asarray(context, dtype=float)
        if ctx.shape != (2,):
            raise ValueError("context vector must have length 2")
        return cls(
            layout=lay,
            dist=lay.fresh_dist(tracker),
            context=ctx,
            requested=(False,) * len(lay.slots),
            max_turns=max_turns,
            tracker=tracker,
        )

    @property
    def domain(self) -> ItemSet:
        return self.layout.domain

    def slot_dist(self, slot: str) -> np.ndarray:
        """Distribution over the slot's values followed by the none mass (a copy)."""
        i = self.layout.position[slot]
        o, k = self.layout.offsets[i], self.layout.sizes[i]
        return self.dist[o : o + k + 1].copy()

    def top_value(self, slot: str) -> tuple[str, float]:
        d = self.slot_dist(slot)[:-1]
        j = int(np.argmax(d))
        return self.domain.slot(slot).values[j], float(d[j])

    def top_two_values(self, slot: str) -> tuple[str, str]:
        d = self.slot_dist(slot)[:-1]
        order = np.argsort(-d, kind="stable")
        values = self.domain.slot(slot).values
        return values[order[0]], values[order[1]]

    def none_mass(self, slot: str) -> float:
        return float(self.dist[self.layout.none_index[self.layout.position[slot]]])

    def observed_mass(self, slot: str) -> float:
        """Value mass in excess of the fresh prior, i.e. mass placed by observations."""
        d = self.slot_dist(slot)[:-1]
        prior = (1.0 - self.tracker.none_prior) / len(d)
        return float(np.clip(d - prior, 0.0, None).sum())

    def hard_constraints(self) -> dict[str, str]:
        thr = self.tracker.accept_threshold
        out = {}
        for i, name in enumerate(self.layout.names):
            o, k = self.layout.offsets[i], self.layout.sizes[i]
            d = self.dist[o : o + k]
            j = int(np.argmax(d))
            if d[j] > thr and self.dist[o + k] < thr:
                out[name] = self.domain.slot(name).values[j]
        return out

    @cached_property
    def _candidate_order(self) -> np.ndarray:
        domain = self.domain
        open_items = np.ones(len(domain), dtype=bool)
        open_items[list(self.rejected)] = False
        mask = domain.constraint_mask(self.hard_constraints()) & open_items
        if not mask.any():
            mask = open_items if open_items.any() else np.ones(len(domain), dtype=bool)
        lay = self.layout
        support = self.dist[lay.item_index] + self.dist[np.asarray(lay.none_index)][None, :]
        score = np.prod(support, axis=1)
        idx = np.flatnonzero(mask)
        order = np.argsort(-score[idx], kind="stable")
        return idx[order]

    def candidate_indices(self) -> np.ndarray:
        return self._candidate_order

    @property
    def candidate_fraction(self) -> float:
        return len(self._candidate_order) / max(len(self.domain), 1)

    def with_context(self, context: Sequence[float]) -> "Belief":
        return replace(self, context=np.asarray(context, dtype=float))


def top_candidates(belief: Belief, domain: ItemSet | None = None) -> list[Item]:
    """Items matching the belief's hard constraints, most supported first.

    Items the user already turned down are left out. Falls back to every item
    not turned down when the hard constraints match nothing.
    """
    domain = belief.domain if domain is None else domain
    return [domain.items[i] for i in belief.candidate_indices()]


def _apply_inform(dist: np.ndarray, lay: BeliefLayout, slot: str, value: str, p: float) -> None:
    i = lay.position[slot]
    o, k = lay.offsets[i], lay.sizes[i]
    seg = dist[o : o + k + 1]
    seg *= 1.0 - p
    seg[lay.domain.slot(slot).index(value)] += p


def _apply_deny(dist: np.ndarray, lay: BeliefLayout, slot: str, value: str, p: float) -> None:
    i = lay.position[slot]
    o, k = lay.offsets[i], lay.sizes[i]
    seg = dist[o : o + k + 1]
    j = lay.domain.slot(slot).index(value)
    moved = p * seg[j]
    others = seg.sum() - seg[j]
    seg[j] -= moved
    if others > 0:
        scale = moved / others
        mask = np.ones(k + 1, dtype=bool)
        mask[j] = False
        seg[mask] += seg[mask] * scale
    else:
        seg[np.arange(k + 1) != j] += moved / k


def _apply_null(dist: np.ndarray, lay: BeliefLayout, slot: str, p: float) -> None:
    i = lay.position[slot]
    o, k = lay.offsets[i], lay.sizes[i]
    seg = dist[o : o + k + 1]
    seg *= 1.0 - p
    seg[k] += p


def update(belief: Belief, system_act: SystemAct, observed: UserAct | Iterable[UserAct]) -> Belief:
    """Belief after the system act and the observed user response."""
    if isinstance(observed, UserAct):
        observed = (observed,)
    lay = belief.layout
    dist = belief.dist.copy()
    for act in observed:
        p = act.confidence
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"confidence {p} outside [0, 1]")
        if p == 0.0:
            continue
        if act.kind == INFORM and act.slot in lay.position:
            _apply_inform(dist, lay, act.slot, act.value, p)
        elif act.kind == AFFIRM and system_act.kind == CONFIRM:
            _apply_inform(dist, lay, system_act.slot, system_act.values[0], p)
        elif act.kind == DENY and system_act.kind == CONFIRM:
            _apply_deny(dist, lay, system_act.slot, system_act.values[0], p)
        elif act.kind == NULL and system_act.kind == REQUEST:
            _apply_null(dist, lay, system_act.slot, belief.tracker.null_shift * p)
    rejected = belief.rejected
    if system_act.kind == RECOMMEND and any(a.kind == DENY and a.confidence > 0.0 for a in observed):
        rejected = rejected | {belief.layout.item_position[system_act.item]}
    requested = belief.requested
    if system_act.kind == REQUEST:
        i = lay.position[system_act.slot]
        requested = requested[:i] + (True,) + requested[i + 1 :]
    return replace(
        belief,
        dist=dist,
        last_act=SYSTEM_ACT_KINDS.index(system_act.kind),
        requested=requested,
        recommended=belief.recommended or system_act.kind == RECOMMEND,
        rejected=rejected,
        turn=belief.turn + 1,
    )


def featurize(belief: Belief, mode: str = PLAIN) -> np.ndarray:
    """Fixed-length feature vector: slot distributions, history block, optional context."""
    if mode not in FEATURE_MODES:
        raise ValueError(f"unknown featurization mode {mode!r}")
    lay = belief.layout
    last = np.zeros(len(SYSTEM_ACT_KINDS))
    if belief.last_act >= 0:
        last[belief.last_act] = 1.0
    history = np.concatenate(
        [
            last,
            np.asarray(belief.requested, dtype=float),
            [
                float(belief.recommended),
                min(belief.turn / belief.max_turns, 1.0),
                belief.candidate_fraction,
            ],
        ]
    )
    parts = [belief.dist, history]
    if mode == WITH_CONTEXT:
        parts.append(belief.context)
    out = np.concatenate(parts)
    assert out.shape[0] == lay.feature_size(mode)
    return out

