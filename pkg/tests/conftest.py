import numpy as np
import pytest

from dialmark.ontology import BOTH_GROUPS, EXPERT_ONLY, INFORM_ONLY, Item, ItemSet, Slot, load_domain


@pytest.fixture(scope="session")
def fin():
    return load_domain("fin")


@pytest.fixture(scope="session")
def cr():
    return load_domain("cr")


@pytest.fixture
def toy():
    """Four items over two constrainable slots and one descriptive slot."""
    slots = (
        Slot("A", ("a", "b")),
        Slot("B", ("x", "y", "z"), group_visibility=EXPERT_ONLY),
        Slot("info", ("i", "j"), constrainable=False, group_visibility=INFORM_ONLY),
    )
    rows = [("a", "x", "i"), ("a", "y", "j"), ("b", "x", "i"), ("b", "z", "j")]
    items = tuple(
        Item(f"t{n}", {"A": a, "B": b, "info": c}) for n, (a, b, c) in enumerate(rows, start=1)
    )
    return ItemSet("toy", slots, items)


def random_itemset(rng: np.random.Generator, max_items: int = 100, max_slots: int = 5, max_values: int = 4) -> ItemSet:
    n_slots = int(rng.integers(1, max_slots + 1))
    slots = []
    for j in range(n_slots):
        k = int(rng.integers(1, max_values + 1))
        slots.append(Slot(f"s{j}", tuple(f"v{j}_{i}" for i in range(k)), group_visibility=BOTH_GROUPS))
    n = int(rng.integers(1, max_items + 1))
    items = []
    for i in range(n):
        items.append(Item(f"x{i}", {s.name: s.values[int(rng.integers(len(s.values)))] for s in slots}))
    return ItemSet("random", tuple(slots), tuple(items))
