import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialmark.acts import RECOMMEND, ActionSpace, SystemAct, UserAct
from dialmark.baselines import HDCPolicy, RQPolicy
from dialmark.belief import Belief, update
from dialmark.engine import (
    EpisodeRecord,
    MaskViolation,
    Policy,
    Turn,
    build_action_mask,
    compute_reward,
    decompose_reward,
    read_transcript,
    run_episode,
)
from dialmark.environments import ENVIRONMENTS, get_environment
from dialmark.rng import substream
from dialmark.usersim import (
    EXPERT,
    BehaviorProfile,
    ErrorModel,
    SimulatedUser,
    UserContext,
    UserFactory,
    UserGoal,
)


class Scripted(Policy):
    name = "scripted"

    def __init__(self, acts):
        self.acts = list(acts)

    def act(self, state, mask, rng):
        return self.acts[min(state.turn, len(self.acts) - 1)]


class RandomLegal(Policy):
    """Uniform over allowed summary actions, bound like a learner would."""

    name = "random"

    def act(self, state, mask, rng):
        from dialmark.engine import bind_action

        return bind_action(int(rng.choice(mask.indices)), state.belief)


def make_user(domain, seed, env, context=None):
    factory = UserFactory(domain, ErrorModel(env.error_rate))
    return factory.new_user(substream(seed, "g"), substream(seed, "u"), substream(seed, "c"), context)


def single_target_user(domain, item, seed):
    cons = {s.name: item[s.name] for s in domain.constrainable_slots}
    goal = UserGoal(cons, item, frozenset({item.id}))
    return SimulatedUser(
        domain, goal, UserContext(EXPERT), BehaviorProfile(), ErrorModel(0.0), substream(seed, "u"), substream(seed, "c")
    )


def recount(record):
    hit = any(t.system_act.kind == RECOMMEND and t.system_act.item in record.target_ids for t in record.turns)
    return 20 * int(hit) - len(record.turns)


def test_environment_table():
    rows = [(e.id, e.error_rate, e.masks, e.user_model) for e in ENVIRONMENTS.values()]
    assert rows == [
        (1, 0.0, True, "normal"),
        (2, 0.0, False, "normal"),
        (3, 0.15, True, "normal"),
        (4, 0.15, False, "normal"),
        (5, 0.15, False, "unfriendly"),
        (6, 0.30, True, "normal"),
    ]


def test_reward_examples(fin):
    t = lambda i, act: Turn(i, act, (), ())  # noqa: E731
    target = frozenset({fin.items[0].id})
    good = SystemAct.recommend(fin.items[0].id)
    req = SystemAct.request("purpose")
    assert compute_reward(EpisodeRecord([t(i, req) for i in range(7)] + [t(7, good)], target)) == 12
    assert compute_reward(EpisodeRecord([t(i, req) for i in range(25)], target)) == -25
    assert compute_reward(EpisodeRecord([], target)) == 0


def test_wrong_recommend_then_bye(fin):
    env = get_environment(2)
    user = make_user(fin, 0, env)
    wrong = next(it for it in fin.items if it.id not in user.goal.target_ids)
    rec = run_episode(Scripted([SystemAct.recommend(wrong.id), SystemAct.bye()]), user, env, np.random.default_rng(0))
    assert rec.length == 2
    assert rec.return_ == -2
    user = make_user(fin, 0, env)
    rec = run_episode(Scripted([SystemAct.bye()]), user, env, np.random.default_rng(0))
    assert rec.return_ == -1


def test_correct_recommend_at_turn_five(fin):
    env = get_environment(1)
    user = make_user(fin, 3, env, UserContext(EXPERT))
    target = sorted(user.goal.target_ids)[0]
    acts = [SystemAct.request("name")] + [SystemAct.request(s.name) for s in fin.constrainable_slots[1:4]]
    acts.append(SystemAct.recommend(target))
    user.profile = BehaviorProfile(patience=10)
    rec = run_episode(Scripted(acts), user, env, np.random.default_rng(0))
    assert rec.length == 5 and rec.success and rec.return_ == 15


def test_masked_action_raises(fin):
    env = get_environment(1)
    user = make_user(fin, 0, env)
    with pytest.raises(MaskViolation):
        run_episode(Scripted([SystemAct.recommend(fin.items[0].id)]), user, env, np.random.default_rng(0))


def test_fresh_mask(fin):
    b = Belief.initial(fin, (1.0, 0.0))
    space = ActionSpace(fin)
    m = build_action_mask(b, 0, get_environment(1))
    k = space.n_slots
    assert m.allowed[:k].all()
    assert not m.allowed[k : 3 * k].any()
    assert not m[space.recommend_index]
    assert m[space.bye_index]
    assert build_action_mask(b, 0, get_environment(2)).allowed.all()


def test_mask_allows_confirm_after_evidence(fin):
    b = Belief.initial(fin, (1.0, 0.0))
    b = update(b, SystemAct.request("purpose"), UserAct("inform", "purpose", fin.slot("purpose").values[0], 0.7))
    space = ActionSpace(fin)
    m = build_action_mask(b, 3, get_environment(1))
    assert m[space.index("confirm", "purpose")]
    assert m[space.index("select", "purpose")]
    assert not m[space.index("confirm", "account")]
    assert m[space.recommend_index]


def test_rq_finds_single_target(fin):
    env = get_environment(1)
    wins = 0
    for seed in range(500):
        item = fin.items[seed % len(fin)]
        rec = run_episode(RQPolicy(), single_target_user(fin, item, seed), env, substream(seed, "p"))
        wins += rec.success
    assert wins / 500 >= 0.95


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 3, 4, 5, 6]))
def test_reward_identity_and_masks(seed, env_id):
    from dialmark.ontology import load_domain

    domain = load_domain("fin")
    env = get_environment(env_id)
    user = make_user(domain, seed, env)
    rec = run_episode(RandomLegal(), user, env, substream(seed, "p"), keep_beliefs=True)
    assert rec.length <= env.max_turns
    assert rec.return_ == recount(rec)
    assert sum(decompose_reward(rec.turns, rec.target_ids)) == rec.return_
    space = ActionSpace(domain)
    for t in rec.turns:
        assert build_action_mask(t.belief, t.index, env)[space.index_of(t.system_act)]


def test_decompose_examples():
    acts = [SystemAct.request("a")] * 4
    turns = [Turn(i, a, (), ()) for i, a in enumerate(acts)]
    hit = Turn(4, SystemAct.recommend("x"), (), ())
    assert decompose_reward(turns + [hit], frozenset({"x"})) == [-1, -1, -1, -1, 19]
    assert decompose_reward([Turn(0, SystemAct.recommend("x"), (), ())], frozenset({"x"})) == [19]
    fail = [Turn(i, SystemAct.request("a"), (), ()) for i in range(25)]
    assert decompose_reward(fail, frozenset({"x"})) == [-1] * 25


def test_run_episode_deterministic(fin):
    env = get_environment(3)
    recs = [run_episode(HDCPolicy(), make_user(fin, 9, env), env, substream(9, "p")) for _ in range(2)]
    assert list(recs[0].transcript_lines()) == list(recs[1].transcript_lines())


def test_transcript_roundtrip(fin):
    env = get_environment(3)
    rec = run_episode(HDCPolicy(), make_user(fin, 4, env), env, substream(4, "p"))
    buf = io.StringIO()
    rec.write_transcript(buf)
    back = read_transcript(buf.getvalue().splitlines())
    assert [b[0] for b in back] == [t.system_act for t in rec.turns]
    for (_, true, observed), t in zip(back, rec.turns):
        assert [a.kind for a in true] == [a.kind for a in t.true]
        assert [a.kind for a in observed] == [a.kind for a in t.observed]
