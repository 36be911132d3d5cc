"""Item universes, slots and candidate-set queries.

An :class:`ItemSet` is the Questioner's search space: a list of items, each a
total assignment of categorical values to slots. Constrainable slots can be
used by users to express constraints; the rest only describe the product.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BOTH_GROUPS = "both_groups"
EXPERT_ONLY = "expert_only"
INFORM_ONLY = "inform_only"
GROUP_VISIBILITY = (BOTH_GROUPS, EXPERT_ONLY, INFORM_ONLY)

DATA_DIR = Path(__file__).parent / "data"
SHIPPED_DOMAINS = ("cr", "fin", "lap", "sfr")


class DomainError(ValueError):
    """Raised for unknown slots/values or an ontology that breaks its invariants."""


class DomainSpecError(ValueError):
    """Raised when a synthetic domain cannot be generated as requested."""


@dataclass(frozen=True)
class Slot:
    name: str
    values: tuple[str, ...]
    constrainable: bool = True
    group_visibility: str = BOTH_GROUPS

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise DomainError(f"slot {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise DomainError(f"slot {self.name!r} has duplicate values")
        if self.group_visibility not in GROUP_VISIBILITY:
            raise DomainError(
                f"slot {self.name!r}: unknown group_visibility {self.group_visibility!r}"
            )
        if not self.constrainable and self.group_visibility != INFORM_ONLY:
            raise DomainError(f"slot {self.name!r} is not constrainable but not inform_only")
        if self.constrainable and self.group_visibility == INFORM_ONLY:
            raise DomainError(f"slot {self.name!r} is constrainable but marked inform_only")

    def index(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise DomainError(f"{value!r} is not a value of slot {self.name!r}") from None


@dataclass(frozen=True)
class Item:
    id: str
    assignment: Mapping[str, str]

    def __getitem__(self, slot: str) -> str:
        return self.assignment[slot]


ConstraintSet = Mapping[str, str]


@dataclass(frozen=True, eq=False)
class ItemSet:
    """Immutable item universe.

    ``codes`` caches the value index of every item on every constrainable slot
    (shape ``(n_items, n_constrainable)``) so that filtering and entropy
    queries are vectorised.
    """

    name: str
    slots: tuple[Slot, ...]
    items: tuple[Item, ...]
    codes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        object.__setattr__(self, "items", tuple(self.items))
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise DomainError("duplicate slot names")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate item ids")
        for it in self.items:
            if set(it.assignment) != set(names):
                raise DomainError(f"item {it.id!r} is not total over the slots")
            for s in self.slots:
                s.index(it.assignment[s.name])
        cons = self.constrainable_slots
        codes = np.array(
            [[s.index(it.assignment[s.name]) for s in cons] for it in self.items],
            dtype=np.int64,
        ).reshape(len(self.items), len(cons))
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "_slot_by_name", {s.name: s for s in self.slots})
        object.__setattr__(self, "_cpos", {s.name: i for i, s in enumerate(cons)})

    @property
    def constrainable_slots(self) -> tuple[Slot, ...]:
        return tuple(s for s in self.slots if s.constrainable)

    @property
    def group1_slots(self) -> tuple[Slot, ...]:
        """Constrainable slots used by both user groups."""
        return tuple(s for s in self.slots if s.group_visibility == BOTH_GROUPS)

    def __len__(self) -> int:
        return len(self.items)

    def slot(self, name: str) -> Slot:
        try:
            return self._slot_by_name[name]
        except KeyError:
            raise DomainError(f"unknown slot {name!r} in domain {self.name!r}") from None

    def slot_position(self, name: str) -> int:
        """Column of a constrainable slot in :attr:`codes`."""
        try:
            return self._cpos[name]
        except KeyError:
            raise DomainError(f"{name!r} is not a constrainable slot of {self.name!r}") from None

    def constraint_mask(self, constraints: ConstraintSet) -> np.ndarray:
        """Boolean mask over items satisfying every constraint."""
        mask = np.ones(len(self.items), dtype=bool)
        for name, value in constraints.items():
            slot = self.slot(name)
            if not slot.constrainable:
                raise DomainError(f"slot {name!r} cannot be constrained")
            mask &= self.codes[:, self.slot_position(name)] == slot.index(value)
        return mask

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "slots": [
                {
                    "name": s.name,
                    "values": list(s.values),
                    "constrainable": s.constrainable,
                    "group_visibility": s.group_visibility,
                }
                for s in self.slots
            ],
            "items": [
                {"id": it.id, "assignment": {s.name: it.assignment[s.name] for s in self.slots}}
                for it in self.items
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n"


def filter_candidates(items: ItemSet, constraints: ConstraintSet) -> list[Item]:
    """Items consistent with all constraints, in domain order."""
    mask = items.constraint_mask(constraints)
    return [it for it, keep in zip(items.items, mask) if keep]


def _entropy_of_counts(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    h = float(-(p * np.log2(p)).sum())
    return h if h > 0.0 else 0.0


def slot_entropy(candidates: Sequence[Item], slot: Slot) -> float:
    """Shannon entropy in bits of the slot's value distribution among candidates."""
    if len(candidates) == 0:
        raise ValueError("slot_entropy needs a non-empty candidate set")
    counts = np.zeros(len(slot.values))
    for it in candidates:
        counts[slot.index(it.assignment[slot.name])] += 1
    return _entropy_of_counts(counts)


def code_entropies(codes: np.ndarray, value_counts: Sequence[int]) -> np.ndarray:
    """Entropy of every column of a candidate code matrix (fast path for policies)."""
    out = np.zeros(codes.shape[1])
    if codes.shape[0] == 0:
        return out
    for j, k in enumerate(value_counts):
        out[j] = _entropy_of_counts(np.bincount(codes[:, j], minlength=k).astype(float))
    return out


def argmax_random(scores: Sequence[float], rng: np.random.Generator, tol: float = 1e-12) -> int:
    """Index of the maximum, ties broken uniformly with ``rng``."""
    scores = np.asarray(scores, dtype=float)
    best = np.flatnonzero(scores >= scores.max() - tol)
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def max_entropy_slot(
    candidates: Sequence[Item], slots: Sequence[Slot], rng: np.random.Generator
) -> Slot | None:
    """Slot with the highest entropy among candidates, or None if none differentiates."""
    if not slots:
        return None
    for s in slots:
        if not s.constrainable:
            raise DomainError(f"slot {s.name!r} is not constrainable")
    scores = [slot_entropy(candidates, s) for s in slots]
    if max(scores) <= 0.0:
        return None
    return slots[argmax_random(scores, rng)]


# --------------------------------------------------------------------------- I/O


def _line_of(text: str, needle: str) -> int:
    idx = text.find(needle)
    return text.count("\n", 0, idx) + 1 if idx >= 0 else 0


def itemset_from_dict(data: dict, source: str = "<dict>", text: str = "") -> ItemSet:
    def fail(msg: str, needle: str = "") -> DomainError:
        line = _line_of(text, needle) if (text and needle) else 0
        where = f"{source}:{line}" if line else source
        return DomainError(f"{where}: {msg}")

    for key in ("name", "slots", "items"):
        if key not in data:
            raise fail(f"missing top-level key {key!r}")
    slots = []
    for raw in data["slots"]:
        name = raw.get("name")
        try:
            slots.append(
                Slot(
                    name=name,
                    values=tuple(raw["values"]),
                    constrainable=bool(raw.get("constrainable", True)),
                    group_visibility=raw.get("group_visibility", BOTH_GROUPS),
                )
            )
        except (KeyError, DomainError) as exc:
            raise fail(f"slot {name!r}: {exc}", f'"name": "{name}"') from None
    items = []
    for raw in data["items"]:
        iid = raw.get("id")
        if iid is None or "assignment" not in raw:
            raise fail("item without id or assignment", '"items"')
        items.append(Item(id=str(iid), assignment=dict(raw["assignment"])))
    by_name = {s.name: s for s in slots}
    for it in items:
        needle = f'"id": "{it.id}"'
        missing = set(by_name) - set(it.assignment)
        extra = set(it.assignment) - set(by_name)
        if missing or extra:
            raise fail(f"item {it.id!r} is not total over the slots (missing {sorted(missing)}, unknown {sorted(extra)})", needle)
        for name, value in it.assignment.items():
            if value not in by_name[name].values:
                raise fail(f"item {it.id!r}: {value!r} is not a value of slot {name!r}", needle)
    try:
        return ItemSet(name=data["name"], slots=tuple(slots), items=tuple(items))
    except DomainError as exc:
        needle = ""
        msg = str(exc)
        for it in items:
            if repr(it.id) in msg:
                needle = f'"id": "{it.id}"'
                break
        raise fail(msg, needle) from None


def load_itemset(path: str | Path) -> ItemSet:
    """Load and validate an ontology JSON file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    return itemset_from_dict(data, source=str(path), text=text)


_CACHE: dict[str, ItemSet] = {}


def load_domain(name: str) -> ItemSet:
    """Load one of the shipped domains (``cr``, ``fin``, ``lap``, ``sfr``) or a file path."""
    key = name.lower()
    if key in SHIPPED_DOMAINS:
        if key not in _CACHE:
            _CACHE[key] = load_itemset(DATA_DIR / f"{key}.json")
        return _CACHE[key]
    return load_itemset(name)


# ------------------------------------------------------------------- generation


@dataclass
class DomainSpec:
    """Cardinalities of a synthetic domain.

    ``constrainable_slots`` maps slot name to value count, in ontology order.
    Slots named in ``group1_slot_names`` are usable by laypersons; the other
    constrainable slots are expert-only.
    """

    name: str
    n_items: int
    constrainable_slots: dict[str, int]
    inform_slots: dict[str, int] = field(default_factory=dict)
    group1_slot_names: tuple[str, ...] = ()
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        inform = d.get("inform_slots")
        if inform is None:
            inform = {f"info_{i + 1}": 3 for i in range(int(d.get("inform_slot_count", 0)))}
        counts = d.get("constrainable_slots") or d.get("constrainable_slot_value_counts")
        return cls(
            name=d.get("name", "synthetic"),
            n_items=int(d["n_items"]),
            constrainable_slots={str(k): int(v) for k, v in counts.items()},
            inform_slots={str(k): int(v) for k, v in inform.items()},
            group1_slot_names=tuple(d.get("group1_slot_names", ())),
            seed=int(d.get("seed", 0)),
        )


def _value_names(slot: str, k: int) -> tuple[str, ...]:
    stem = slot.replace(" ", "_").replace(".", "")
    return tuple(f"{stem}_{i}" for i in range(k))


def generate_synthetic_domain(spec: DomainSpec | dict) -> ItemSet:
    """Deterministic synthetic item universe with the requested cardinalities.

    Items have pairwise distinct constrainable-value vectors and every value of
    every constrainable slot occurs on at least one item.
    """
    if isinstance(spec, dict):
        spec = DomainSpec.from_dict(spec)
    counts = list(spec.constrainable_slots.values())
    names = list(spec.constrainable_slots)
    n = spec.n_items
    if n < 1:
        raise DomainSpecError("n_items must be positive")
    if not names:
        raise DomainSpecError("at least one constrainable slot is required")
    if any(k < 2 for k in counts):
        raise DomainSpecError("every constrainable slot needs at least 2 values")
    unknown = set(spec.group1_slot_names) - set(names)
    if unknown:
        raise DomainSpecError(f"group-1 slots not among constrainable slots: {sorted(unknown)}")
    if max(counts) > n:
        raise DomainSpecError(
            f"{n} items cannot cover a slot with {max(counts)} values"
        )
    if math.prod(counts) < n:
        raise DomainSpecError(
            f"only {math.prod(counts)} distinct value vectors for {n} items"
        )

    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, n, *counts]))
    # Each column starts as a shuffled cover of its values, then duplicates are repaired.
    columns = []
    for k in counts:
        col = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        rng.shuffle(col)
        columns.append(col)
    codes = np.stack(columns, axis=1)

    def counts_of(j):
        return np.bincount(codes[:, j], minlength=counts[j])

    for _ in range(100 * n):
        seen: dict[tuple, int] = {}
        dup = None
        for i, row in enumerate(map(tuple, codes)):
            if row in seen:
                dup = i
                break
            seen[row] = i
        if dup is None:
            break
        # Re-draw one coordinate of the duplicate, keeping value coverage intact.
        for j in rng.permutation(len(counts)):
            if counts_of(j)[codes[dup, j]] > 1:
                codes[dup, j] = rng.integers(0, counts[j])
                break
    else:  # pragma: no cover - defensive, prod(counts) >= n makes this unreachable in practice
        raise DomainSpecError("could not generate distinct items")

    slots = [
        Slot(
            name=s,
            values=_value_names(s, k),
            constrainable=True,
            group_visibility=BOTH_GROUPS if s in spec.group1_slot_names else EXPERT_ONLY,
        )
        for s, k in zip(names, counts)
    ]
    inform_slots = [
        Slot(name=s, values=_value_names(s, k), constrainable=False, group_visibility=INFORM_ONLY)
        for s, k in spec.inform_slots.items()
    ]
    width = len(str(n))
    items = []
    for i in range(n):
        assignment = {s.name: s.values[codes[i, j]] for j, s in enumerate(slots)}
        for s in inform_slots:
            assignment[s.name] = s.values[int(rng.integers(len(s.values)))]
        items.append(Item(id=f"{spec.name}_{i:0{width}d}", assignment=assignment))
    return ItemSet(name=spec.name, slots=tuple(slots + inform_slots), items=tuple(items))


# Cardinalities of the shipped domains. FIN value counts sum to 64 over nine
# constrainable slots; the other domains use five values per constrainable slot.
SHIPPED_SPECS: dict[str, dict] = {
    "fin": {
        "name": "fin",
        "n_items": 14,
        "constrainable_slots": {
            "name": 14,
            "purpose": 6,
            "account": 4,
            "insurance": 3,
            "min principal": 10,
            "max principal": 10,
            "min duration": 6,
            "max duration": 8,
            "minimum age": 3,
        },
        "inform_slots": {"interest rate": 6, "monthly fee": 4, "repayment": 3, "early repayment": 2},
        "group1_slot_names": ["minimum age", "purpose", "account"],
        "seed": 0,
    },
    "cr": {
        "name": "cr",
        "n_items": 110,
        "constrainable_slots": {"price range": 5, "area": 5, "food": 5},
        "inform_slots": {"phone": 5, "postcode": 5, "address": 5},
        "group1_slot_names": ["price range"],
        "seed": 0,
    },
    "sfr": {
        "name": "sfr",
        "n_items": 271,
        "constrainable_slots": {
            "price range": 5,
            "allowed for kids": 5,
            "good for meal": 5,
            "area": 5,
            "near": 5,
            "food": 5,
        },
        "inform_slots": {"phone": 5, "postcode": 5, "address": 5},
        "group1_slot_names": ["price range", "allowed for kids", "good for meal"],
        "seed": 0,
    },
    "lap": {
        "name": "lap",
        "n_items": 123,
        "constrainable_slots": {
            "utility": 5,
            "price range": 5,
            "weight range": 5,
            "warranty": 5,
            "is for business computing": 5,
            "family": 5,
            "processor class": 5,
            "sys memory": 5,
            "platform": 5,
            "drive range": 5,
            "battery rating": 5,
        },
        "inform_slots": {"drive": 5, "dimension": 5, "price": 5},
        "group1_slot_names": [
            "utility",
            "price range",
            "weight range",
            "warranty",
            "is for business computing",
        ],
        "seed": 0,
    },
}


def write_shipped_domains(directory: str | Path = DATA_DIR) -> list[Path]:
    """Regenerate the shipped ontology files from :data:`SHIPPED_SPECS`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for key, spec in SHIPPED_SPECS.items():
        path = directory / f"{key}.json"
        path.write_text(generate_synthetic_domain(spec).to_json(), encoding="utf-8")
        out.append(path)
    return out


def distinct_constrainable_vectors(items: Iterable[Item], slots: Sequence[Slot]) -> int:
    return len({tuple(it.assignment[s.name] for s in slots) for it in items})

