"""Semantic dialogue acts and the summary action space exposed to policies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ontology import DomainError, ItemSet

REQUEST = "request"
CONFIRM = "confirm"
SELECT = "select"
RECOMMEND = "recommend"
BYE = "bye"
SYSTEM_ACT_KINDS = (REQUEST, CONFIRM, SELECT, RECOMMEND, BYE)

INFORM = "inform"
AFFIRM = "affirm"
DENY = "deny"
NULL = "null_response"
USER_ACT_KINDS = (INFORM, AFFIRM, DENY, NULL, BYE)


@dataclass(frozen=True)
class SystemAct:
    kind: str
    slot: Optional[str] = None
    values: tuple[str, ...] = ()
    item: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SYSTEM_ACT_KINDS:
            raise ValueError(f"unknown system act kind {self.kind!r}")
        if self.kind in (REQUEST, CONFIRM, SELECT) and self.slot is None:
            raise ValueError(f"{self.kind} needs a slot")
        n_values = {REQUEST: 0, CONFIRM: 1, SELECT: 2}.get(self.kind, 0)
        if len(self.values) != n_values:
            raise ValueError(f"{self.kind} takes {n_values} values, got {self.values}")
        if self.kind == SELECT and self.values[0] == self.values[1]:
            raise ValueError("select needs two distinct values")
        if self.kind == RECOMMEND and self.item is None:
            raise ValueError("recommend needs an item id")

    @classmethod
    def request(cls, slot: str) -> "SystemAct":
        return cls(REQUEST, slot)

    @classmethod
    def confirm(cls, slot: str, value: str) -> "SystemAct":
        return cls(CONFIRM, slot, (value,))

    @classmethod
    def select(cls, slot: str, v1: str, v2: str) -> "SystemAct":
        return cls(SELECT, slot, (v1, v2))

    @classmethod
    def recommend(cls, item_id: str) -> "SystemAct":
        return cls(RECOMMEND, item=item_id)

    @classmethod
    def bye(cls) -> "SystemAct":
        return cls(BYE)

    def validate(self, domain: ItemSet) -> None:
        if self.slot is not None:
            slot = domain.slot(self.slot)
            if not slot.constrainable:
                raise DomainError(f"{self.kind} over non-constrainable slot {self.slot!r}")
            for v in self.values:
                slot.index(v)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.slot is not None:
            d["slot"] = self.slot
        if self.values:
            d["values"] = list(self.values)
        if self.item is not None:
            d["item"] = self.item
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemAct":
        return cls(d["kind"], d.get("slot"), tuple(d.get("values", ())), d.get("item"))

    def __str__(self) -> str:
        args = [a for a in (self.slot, *self.values, self.item) if a is not None]
        return f"{self.kind}({', '.join(args)})"


@dataclass(frozen=True)
class UserAct:
    kind: str
    slot: Optional[str] = None
    value: Optional[str] = None
    confidence: float = 1.0

    def __post_init__(self):
        if self.kind not in USER_ACT_KINDS:
            raise ValueError(f"unknown user act kind {self.kind!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.kind == INFORM and (self.slot is None or self.value is None):
            raise ValueError("inform needs a slot and a value")

    def with_confidence(self, confidence: float) -> "UserAct":
        return UserAct(self.kind, self.slot, self.value, float(confidence))

    def same_content(self, other: "UserAct") -> bool:
        return (self.kind, self.slot, self.value) == (other.kind, other.slot, other.value)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "confidence": round(self.confidence, 6)}
        if self.slot is not None:
            d["slot"] = self.slot
        if self.value is not None:
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UserAct":
        return cls(d["kind"], d.get("slot"), d.get("value"), d.get("confidence", 1.0))

    def __str__(self) -> str:
        args = [a for a in (self.slot, self.value) if a is not None]
        return f"{self.kind}({', '.join(args)})@{self.confidence:.2f}"


class ActionSpace:
    """Slot-level summary actions for a domain.

    Layout: ``request(f)`` for every constrainable slot, then ``confirm(f)``,
    then ``select(f)``, then ``recommend`` and ``bye``. Value and item bindings
    are resolved from the belief at the time the action is taken.
    """

    def __init__(self, domain: ItemSet):
        self.domain = domain
        self.slot_names = tuple(s.name for s in domain.constrainable_slots)
        k = len(self.slot_names)
        self.n_slots = k
        self.recommend_index = 3 * k
        self.bye_index = 3 * k + 1
        self.size = 3 * k + 2
        self._slot_pos = {name: i for i, name in enumerate(self.slot_names)}

    def __len__(self) -> int:
        return self.size

    def describe(self, index: int) -> tuple[str, Optional[str]]:
        k = self.n_slots
        if not 0 <= index < self.size:
            raise IndexError(index)
        if index < k:
            return REQUEST, self.slot_names[index]
        if index < 2 * k:
            return CONFIRM, self.slot_names[index - k]
        if index < 3 * k:
            return SELECT, self.slot_names[index - 2 * k]
        return (RECOMMEND, None) if index == self.recommend_index else (BYE, None)

    def index_of(self, act: SystemAct) -> int:
        if act.kind == RECOMMEND:
            return self.recommend_index
        if act.kind == BYE:
            return self.bye_index
        offset = {REQUEST: 0, CONFIRM: 1, SELECT: 2}[act.kind] * self.n_slots
        return offset + self._slot_pos[act.slot]

    def index(self, kind: str, slot: Optional[str] = None) -> int:
        if kind == RECOMMEND:
            return self.recommend_index
        if kind == BYE:
            return self.bye_index
        offset = {REQUEST: 0, CONFIRM: 1, SELECT: 2}[kind] * self.n_slots
        return offset + self._slot_pos[slot]

    def labels(self) -> list[str]:
        out = []
        for i in range(self.size):
            kind, slot = self.describe(i)
            out.append(f"{kind}({slot})" if slot else kind)
        return out
