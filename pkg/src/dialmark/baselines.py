"""Non-learned questioner policies: RQ, EMDB, EMDM and the handcrafted HDC.

RQ, EMDB and EMDM take the top hypothesis of every observed user act at face
value; HDC reads the tracked belief.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .acts import INFORM, RECOMMEND, REQUEST, SystemAct, UserAct
from .belief import Belief
from .engine import ActionMask, DialogueState, EpisodeRecord, Policy, action_space
from .ontology import ItemSet, argmax_random, code_entropies

HDC_CONFIRM_LOW = 0.5
HDC_CONFIRM_HIGH = 0.8
HDC_NONE_RESOLVED = 0.9


def observed_constraints(history: Iterable[tuple[SystemAct, Sequence[UserAct]]]) -> dict[str, str]:
    """Slot values from observed informs, the latest inform for a slot winning."""
    out: dict[str, str] = {}
    for _, observed in history:
        for a in observed:
            if a.kind == INFORM:
                out[a.slot] = a.value
    return out


def requested_slots(history: Iterable[tuple[SystemAct, Sequence[UserAct]]]) -> set[str]:
    return {act.slot for act, _ in history if act.kind == REQUEST}


def _allowed(mask: ActionMask | None, domain: ItemSet, act: SystemAct) -> bool:
    return mask is None or mask[action_space(domain).index_of(act)]


def _candidate_indices(domain: ItemSet, constraints: Mapping[str, str]) -> np.ndarray:
    return np.flatnonzero(domain.constraint_mask(constraints))


def _fallback_request(
    domain: ItemSet, unrequested: Sequence[str], rng: np.random.Generator
) -> SystemAct:
    if unrequested:
        return SystemAct.request(unrequested[int(rng.integers(len(unrequested)))])
    slots = [s.name for s in domain.constrainable_slots]
    if slots:
        return SystemAct.request(slots[int(rng.integers(len(slots)))])
    return SystemAct.bye()


def _search_act(
    constraints: Mapping[str, str],
    requested: Iterable[str],
    domain: ItemSet,
    rng: np.random.Generator,
    by_entropy: bool,
    mask: ActionMask | None,
) -> SystemAct:
    requested = set(requested)
    names = [s.name for s in domain.constrainable_slots]
    sizes = [len(s.values) for s in domain.constrainable_slots]
    unrequested_pos = [i for i, n in enumerate(names) if n not in requested]
    cand = _candidate_indices(domain, constraints)
    if len(cand) == 0:
        # Contradictory top hypotheses: keep asking, otherwise guess from the whole set.
        pool = np.arange(len(domain))
        entropies = np.ones(len(names))
    else:
        pool = cand
        entropies = code_entropies(domain.codes[cand], sizes)
    open_entropy = entropies[unrequested_pos] if unrequested_pos else np.zeros(0)
    if len(open_entropy) and open_entropy.max() > 0.0:
        if by_entropy:
            slot = names[unrequested_pos[argmax_random(open_entropy, rng)]]
        else:
            slot = names[unrequested_pos[int(rng.integers(len(unrequested_pos)))]]
        return SystemAct.request(slot)
    act = SystemAct.recommend(domain.items[int(pool[int(rng.integers(len(pool)))])].id)
    if _allowed(mask, domain, act):
        return act
    return _fallback_request(domain, [names[i] for i in unrequested_pos], rng)


def rq_act(
    constraints: Mapping[str, str],
    requested: Iterable[str],
    domain: ItemSet,
    rng: np.random.Generator,
    mask: ActionMask | None = None,
) -> SystemAct:
    """Random questioner.

    Requests a uniformly random slot not asked yet while the candidate set still
    differs on some unasked slot, then recommends a random candidate.
    """
    return _search_act(constraints, requested, domain, rng, False, mask)


def emdb_act(
    constraints: Mapping[str, str],
    requested: Iterable[str],
    domain: ItemSet,
    rng: np.random.Generator,
    mask: ActionMask | None = None,
) -> SystemAct:
    """Database entropy questioner: asks the unasked slot with maximal candidate entropy."""
    return _search_act(constraints, requested, domain, rng, True, mask)


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    if counts.size == 0:
        return 0.0
    p = counts / counts.sum()
    h = float(-(p * np.log2(p)).sum())
    return h if h > 0.0 else 0.0


class EMDMHistory:
    """Successful past dialogues as (evidence, recommended item) pairs.

    Evidence is stored as a row of value indices per constrainable slot, -1
    where the slot was never informed.
    """

    def __init__(self, domain: ItemSet):
        self.domain = domain
        self.names = [s.name for s in domain.constrainable_slots]
        self._evidence = np.full((64, len(self.names)), -1, dtype=np.int64)
        self._recs = np.zeros(64, dtype=np.int64)
        self._item_pos = {it.id: i for i, it in enumerate(domain.items)}
        self.n = 0

    def __len__(self) -> int:
        return self.n

    @property
    def evidence(self) -> np.ndarray:
        return self._evidence[: self.n]

    @property
    def recommendations(self) -> np.ndarray:
        return self._recs[: self.n]

    def add(self, evidence: Mapping[str, str], item_id: str) -> None:
        if self.n == len(self._recs):
            self._evidence = np.concatenate([self._evidence, np.full_like(self._evidence, -1)])
            self._recs = np.concatenate([self._recs, np.zeros_like(self._recs)])
        row = self._evidence[self.n]
        row[:] = -1
        for slot, value in evidence.items():
            row[self.names.index(slot)] = self.domain.slot(slot).index(value)
        self._recs[self.n] = self._item_pos[item_id]
        self.n += 1

    def add_record(self, record: EpisodeRecord) -> bool:
        """Store a successful episode; failed ones are ignored."""
        if not record.success:
            return False
        hits = [
            t.system_act.item
            for t in record.turns
            if t.system_act.kind == RECOMMEND and t.system_act.item in record.target_ids
        ]
        history = [(t.system_act, t.observed) for t in record.turns]
        self.add(observed_constraints(history), hits[0])
        return True

    def matching(self, evidence: Mapping[str, str]) -> np.ndarray:
        ev = self.evidence
        keep = np.ones(self.n, dtype=bool)
        for slot, value in evidence.items():
            keep &= ev[:, self.names.index(slot)] == self.domain.slot(slot).index(value)
        return keep

    def to_records(self) -> list[dict]:
        items = self.domain.items
        out = []
        for row, rec in zip(self.evidence, self.recommendations):
            ev = {
                self.names[j]: self.domain.slot(self.names[j]).values[v]
                for j, v in enumerate(row)
                if v >= 0
            }
            out.append({"evidence": ev, "recommendation": items[rec].id})
        return out

    @classmethod
    def from_records(cls, domain: ItemSet, records: Iterable[dict]) -> "EMDMHistory":
        h = cls(domain)
        for r in records:
            h.add(r["evidence"], r["recommendation"])
        return h


def emdm_act(
    history: EMDMHistory,
    evidence: Mapping[str, str],
    requested: Iterable[str],
    domain: ItemSet,
    rng: np.random.Generator,
    mask: ActionMask | None = None,
) -> SystemAct:
    """Experience entropy questioner.

    Picks the request that minimises the expected entropy of past successful
    recommendations consistent with the evidence, or recommends the modal past
    recommendation once no request helps. Without matching history it behaves
    as :func:`rq_act`.
    """
    requested = set(requested)
    keep = history.matching(evidence)
    if not keep.any():
        return rq_act(evidence, requested, domain, rng, mask)
    n_items = len(domain)
    recs = history.recommendations[keep]
    counts = np.bincount(recs, minlength=n_items)
    h0 = _entropy(counts.astype(float))
    names = history.names
    unrequested = [j for j, n in enumerate(names) if n not in requested]
    expected = []
    if h0 > 0.0:
        ev = history.evidence[keep]
        for j in unrequested:
            col = ev[:, j]
            known = col >= 0
            if not known.any():
                expected.append(h0)
                continue
            k = len(domain.constrainable_slots[j].values)
            joint = np.zeros((k, n_items))
            np.add.at(joint, (col[known], recs[known]), 1.0)
            weights = joint.sum(axis=1)
            total = weights.sum()
            expected.append(
                sum(w / total * _entropy(row) for w, row in zip(weights, joint) if w > 0)
            )
    if expected and min(expected) < h0 - 1e-12:
        best = argmax_random(-np.asarray(expected), rng)
        return SystemAct.request(names[unrequested[best]])
    top = np.flatnonzero(counts == counts.max())
    act = SystemAct.recommend(domain.items[int(top[int(rng.integers(len(top)))])].id)
    if _allowed(mask, domain, act):
        return act
    if expected:
        best = argmax_random(-np.asarray(expected), rng)
        return SystemAct.request(names[unrequested[best]])
    return _fallback_request(domain, [names[j] for j in unrequested], rng)


def hdc_act(belief: Belief, domain: ItemSet | None = None, mask: ActionMask | None = None) -> SystemAct:
    """Handcrafted rules, first match wins.

    1. confirm the first slot whose top value mass lies in [0.5, 0.8);
    2. while several candidates remain, request the first slot that is neither
       resolved (top mass >= 0.5) nor ruled out (none mass >= 0.9);
    3. recommend the top candidate.
    """
    domain = belief.domain if domain is None else domain
    names = belief.layout.names
    for name in names:
        value, mass = belief.top_value(name)
        if HDC_CONFIRM_LOW <= mass < HDC_CONFIRM_HIGH:
            act = SystemAct.confirm(name, value)
            if _allowed(mask, domain, act):
                return act
    if len(belief.candidate_indices()) > 1:
        for name in names:
            if belief.top_value(name)[1] < HDC_CONFIRM_LOW and belief.none_mass(name) < HDC_NONE_RESOLVED:
                return SystemAct.request(name)
    act = SystemAct.recommend(domain.items[int(belief.candidate_indices()[0])].id)
    if _allowed(mask, domain, act):
        return act
    return SystemAct.request(names[0]) if names else SystemAct.bye()


class RQPolicy(Policy):
    name = "RQ"

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator) -> SystemAct:
        return rq_act(
            observed_constraints(state.history), requested_slots(state.history), state.domain, rng, mask
        )


class EMDBPolicy(Policy):
    name = "EMDB"

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator) -> SystemAct:
        return emdb_act(
            observed_constraints(state.history), requested_slots(state.history), state.domain, rng, mask
        )


class EMDMPolicy(Policy):
    """EMDM with a history that grows during training and is frozen for testing."""

    name = "EMDM"

    def __init__(self, domain: ItemSet):
        self.history = EMDMHistory(domain)
        self.training = True

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator) -> SystemAct:
        return emdm_act(
            self.history,
            observed_constraints(state.history),
            requested_slots(state.history),
            state.domain,
            rng,
            mask,
        )

    def end_episode(self, record: EpisodeRecord) -> None:
        if self.training:
            self.history.add_record(record)

    def freeze(self) -> None:
        self.training = False


class HDCPolicy(Policy):
    name = "HDC"

    def act(self, state: DialogueState, mask: ActionMask, rng: np.random.Generator) -> SystemAct:
        return hdc_act(state.belief, state.domain, mask)

