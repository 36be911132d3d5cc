import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialmark.acts import AFFIRM, BYE, DENY, INFORM, NULL, SystemAct, UserAct
from dialmark.ontology import EXPERT_ONLY, filter_candidates, load_domain
from dialmark.usersim import (
    EXPERT,
    LAYPERSON,
    BehaviorProfile,
    ConfigurationError,
    ErrorModel,
    ProfileSampler,
    UserContext,
    UserGoal,
    corrupt,
    respond,
    sample_context,
    sample_goal,
)

QUIET = BehaviorProfile(p_volunteer=0.0, p_repeat=0.0)


def goal_of(domain, constraints):
    seed = filter_candidates(domain, constraints)[0]
    return UserGoal(constraints, seed, frozenset(it.id for it in filter_candidates(domain, constraints)))


def test_context_vectors():
    assert UserContext(LAYPERSON).vector == (1.0, 0.0)
    assert UserContext.from_vector([0, 1]).group == EXPERT
    with pytest.raises(ValueError):
        UserContext.from_vector([1, 1])
    with pytest.raises(ValueError):
        UserContext("novice")


def test_context_sampling_is_balanced():
    rng = np.random.default_rng(0)
    lay = sum(sample_context(rng).group == LAYPERSON for _ in range(10_000))
    assert lay / 10_000 == pytest.approx(0.5, abs=0.02)


def test_fin_goal_rules(fin):
    rng = np.random.default_rng(0)
    group1 = {"minimum age", "purpose", "account"}
    all_slots = {s.name for s in fin.constrainable_slots}
    sizes = set()
    for _ in range(500):
        g = sample_goal(fin, UserContext(LAYPERSON), rng)
        assert set(g.constraints) <= group1
        sizes.add(len(g.constraints))
        e = sample_goal(fin, UserContext(EXPERT), rng)
        assert len(e.constraints) == 3 and set(e.constraints) <= all_slots
    assert sizes == {1, 2, 3}


@pytest.mark.parametrize("name", ["fin", "cr", "sfr", "lap"])
def test_goals_satisfiable_and_layperson_pure(name):
    d = load_domain(name)
    expert_only = {s.name for s in d.constrainable_slots if s.group_visibility == EXPERT_ONLY}
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        g = sample_goal(d, UserContext(LAYPERSON), rng)
        assert not expert_only & set(g.constraints)
        assert g.seed_item.id in g.target_ids
    for _ in range(500):
        g = sample_goal(d, sample_context(rng), rng)
        assert g.target_ids == {it.id for it in filter_candidates(d, g.constraints)}


def test_layperson_without_group1_slots(toy):
    from dialmark.ontology import ItemSet, Slot

    slots = tuple(Slot(s.name, s.values, s.constrainable, EXPERT_ONLY if s.constrainable else s.group_visibility) for s in toy.slots)
    d = ItemSet("nogroup", slots, toy.items)
    with pytest.raises(ConfigurationError):
        sample_goal(d, UserContext(LAYPERSON), np.random.default_rng(0))


def test_respond_examples(fin):
    car = "car" if "car" in fin.slot("purpose").values else fin.slot("purpose").values[0]
    g = goal_of(fin, {"purpose": car})
    assert respond(g, QUIET, SystemAct.request("purpose")) == (UserAct(INFORM, "purpose", car, 1.0),)
    assert respond(g, QUIET, SystemAct.request("account"))[0].kind == NULL
    assert respond(g, QUIET, SystemAct.confirm("account", fin.slot("account").values[0]))[0].kind == NULL
    assert respond(g, QUIET, SystemAct.confirm("purpose", car))[0].kind == AFFIRM
    other = next(v for v in fin.slot("purpose").values if v != car)
    assert respond(g, QUIET, SystemAct.confirm("purpose", other))[0].kind == DENY
    assert respond(g, QUIET, SystemAct.select("purpose", other, car))[0] == UserAct(INFORM, "purpose", car, 1.0)
    hit = sorted(g.target_ids)[0]
    miss = next(it.id for it in fin.items if it.id not in g.target_ids)
    assert respond(g, QUIET, SystemAct.recommend(hit))[0].kind == BYE
    assert respond(g, QUIET, SystemAct.recommend(miss))[0].kind == DENY
    assert respond(g, QUIET, SystemAct.bye())[0].kind == BYE


def test_volunteering(fin):
    g = sample_goal(fin, UserContext(EXPERT), np.random.default_rng(3))
    slot = next(iter(g.constraints))
    eager = BehaviorProfile(p_volunteer=1.0)
    acts = respond(g, eager, SystemAct.request(slot), rng=np.random.default_rng(0))
    assert len(acts) == 2 and acts[1].slot != slot and acts[1].slot in g.constraints
    rude = BehaviorProfile(p_volunteer=1.0, unfriendly=True)
    assert len(respond(g, rude, SystemAct.request(slot), rng=np.random.default_rng(0))) == 1


def test_unfriendly_null_substitution_rate(fin):
    g = sample_goal(fin, UserContext(EXPERT), np.random.default_rng(3))
    slot = next(iter(g.constraints))
    prof = ProfileSampler(user_model="unfriendly").sample(np.random.default_rng(0))
    assert prof.unfriendly and prof.p_volunteer == 0.0
    rng = np.random.default_rng(0)
    nulls = sum(respond(g, prof, SystemAct.request(slot), rng=rng)[0].kind == NULL for _ in range(5000))
    assert nulls / 5000 == pytest.approx(0.4, abs=0.03)


def test_respond_is_pure(fin):
    g = sample_goal(fin, UserContext(EXPERT), np.random.default_rng(5))
    slot = next(iter(g.constraints))
    prof = BehaviorProfile()
    a = [respond(g, prof, SystemAct.request(slot), rng=np.random.default_rng(i)) for i in range(20)]
    b = [respond(g, prof, SystemAct.request(slot), rng=np.random.default_rng(i)) for i in range(20)]
    assert a == b


def test_profile_sampling_ranges():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = ProfileSampler().sample(rng)
        assert 0.2 <= p.p_volunteer <= 0.4 and 0.05 <= p.p_repeat <= 0.15 and p.patience in (4, 5, 6)
    with pytest.raises(ValueError):
        BehaviorProfile(patience=0)
    with pytest.raises(ValueError):
        BehaviorProfile(p_repeat=1.5)


def test_corrupt_identity_at_zero(fin):
    rng = np.random.default_rng(0)
    acts = [UserAct(INFORM, "purpose", fin.slot("purpose").values[1]), UserAct(AFFIRM), UserAct(DENY), UserAct(NULL), UserAct(BYE)]
    for a in acts * 20:
        assert corrupt(a, ErrorModel(0.0), fin, rng).same_content(a)


def test_corrupt_rate(fin):
    rng = np.random.default_rng(0)
    act = UserAct(INFORM, "purpose", fin.slot("purpose").values[0])
    flipped = sum(not corrupt(act, ErrorModel(0.15), fin, rng).same_content(act) for _ in range(10_000))
    assert flipped / 10_000 == pytest.approx(0.15, abs=0.01)


def test_corrupt_full(fin):
    rng = np.random.default_rng(0)
    for v in fin.slot("purpose").values:
        obs = corrupt(UserAct(INFORM, "purpose", v), ErrorModel(1.0), fin, rng)
        assert obs.kind == INFORM and obs.slot == "purpose" and obs.value != v
    assert corrupt(UserAct(AFFIRM), ErrorModel(1.0), fin, rng).kind == DENY
    assert corrupt(UserAct(DENY), ErrorModel(1.0), fin, rng).kind == AFFIRM
    assert corrupt(UserAct(BYE), ErrorModel(1.0), fin, rng).kind == NULL


def test_confidence_distributions(fin):
    rng = np.random.default_rng(0)
    act = UserAct(AFFIRM)
    good = [corrupt(act, ErrorModel(0.0), fin, rng).confidence for _ in range(4000)]
    bad = [corrupt(act, ErrorModel(1.0), fin, rng).confidence for _ in range(4000)]
    assert np.mean(good) == pytest.approx(0.8, abs=0.02)
    assert np.mean(bad) == pytest.approx(0.5, abs=0.02)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.integers(0, 8))
def test_corrupt_keeps_inform_slot(seed, e, j):
    fin = load_domain("fin")
    slot = fin.constrainable_slots[j]
    rng = np.random.default_rng(seed)
    v = slot.values[int(rng.integers(len(slot.values)))]
    obs = corrupt(UserAct(INFORM, slot.name, v), ErrorModel(e), fin, rng)
    assert obs.kind == INFORM and obs.slot == slot.name
    assert 0.0 <= obs.confidence <= 1.0
