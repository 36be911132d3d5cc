import numpy as np
import pytest

from dialmark.baselines import HDCPolicy
from dialmark.belief import PLAIN, WITH_CONTEXT, layout_for
from dialmark.environments import get_environment
from dialmark.personalization import (
    BELIEF_STATE,
    IDENTITY_SEGMENTATION,
    SEGMENTED,
    VANILLA,
    PolicySet,
    SegmentationMap,
    default_factory,
    feature_size,
    make_learner_policies,
    play,
    route,
    train_cell,
)
from dialmark.rl import LearnerPolicy
from dialmark.rl.common import uniform_allowed
from dialmark.usersim import EXPERT, LAYPERSON, ConfigurationError, UserContext

LAY = UserContext(LAYPERSON)
EXP = UserContext(EXPERT)


class StubLearner:
    """Acts uniformly over allowed actions and records every input it sees."""

    kind = "STUB"

    def __init__(self):
        self.inputs = []
        self.dialogues = 0
        self.transitions = 0

    def select_action(self, x, mask, phase, rng):
        self.inputs.append(x.copy())
        return uniform_allowed(mask, rng)

    def observe(self, t, next_action=None):
        self.transitions += 1

    def end_episode(self):
        self.dialogues += 1


def stub_set(mode):
    fm = WITH_CONTEXT if mode == BELIEF_STATE else PLAIN
    if mode == SEGMENTED:
        return PolicySet(mode, {s: LearnerPolicy(StubLearner(), fm) for s in IDENTITY_SEGMENTATION.segments})
    return PolicySet(mode, {None: LearnerPolicy(StubLearner(), fm)})


def test_segmentation_map():
    assert IDENTITY_SEGMENTATION((1, 0)) == LAYPERSON
    assert IDENTITY_SEGMENTATION(EXP) == EXPERT
    with pytest.raises(ConfigurationError):
        IDENTITY_SEGMENTATION((1, 1))
    merged = SegmentationMap({(1.0, 0.0): "all", (0.0, 1.0): "all"})
    assert merged.segments == ("all",)


def test_route_examples():
    seg = stub_set(SEGMENTED)
    pol, fm = route(SEGMENTED, LAY, seg)
    assert pol is seg.policies[LAYPERSON] and fm == PLAIN
    assert route(SEGMENTED, EXP, seg)[0] is seg.policies[EXPERT]
    bs = stub_set(BELIEF_STATE)
    assert route(BELIEF_STATE, LAY, bs) == (bs.policies[None], WITH_CONTEXT)
    van = stub_set(VANILLA)
    assert route(VANILLA, LAY, van)[0] is route(VANILLA, EXP, van)[0]
    with pytest.raises(ConfigurationError):
        route(SEGMENTED, LAY, van)
    with pytest.raises(ConfigurationError):
        route(VANILLA, (0.5, 0.5), van)


def test_policy_set_validates_keys():
    with pytest.raises(ConfigurationError):
        PolicySet(SEGMENTED, {None: HDCPolicy()})
    with pytest.raises(ConfigurationError):
        PolicySet("x", {None: HDCPolicy()})


def test_learner_dimensions(fin):
    assert feature_size(fin, BELIEF_STATE) == feature_size(fin, VANILLA) + 2 == 92
    seg = make_learner_policies(SEGMENTED, "DQN", fin, 0)
    learners = [p.learner for p in seg]
    assert len(learners) == 2 and learners[0] is not learners[1]
    assert not np.array_equal(learners[0].net.weights[0], learners[1].net.weights[0])
    bs = make_learner_policies(BELIEF_STATE, "GP", fin, 0)
    assert bs.policies[None].learner.n_features == layout_for(fin).feature_size(WITH_CONTEXT)


def test_segment_counts_and_conservation(fin):
    env = get_environment(1)
    policies = stub_set(SEGMENTED)
    _, counts, _ = play(policies, default_factory(fin, env), env, 4000, 0, "train")
    assert sum(counts.values()) == 4000
    for seg, n in counts.items():
        assert n == pytest.approx(2000, abs=90)
        assert policies.policies[seg].learner.dialogues == n


def test_vanilla_sees_every_dialogue(fin):
    env = get_environment(1)
    policies = stub_set(VANILLA)
    play(policies, default_factory(fin, env), env, 300, 0, "train")
    assert policies.policies[None].learner.dialogues == 300


def test_segmented_inputs_are_context_free(fin):
    env = get_environment(3)
    policies = stub_set(SEGMENTED)
    play(policies, default_factory(fin, env), env, 200, 1, "train")
    plain = feature_size(fin, VANILLA)
    for p in policies:
        assert all(len(x) == plain for x in p.learner.inputs)


def test_vanilla_and_belief_state_differ_only_in_context(fin):
    env = get_environment(3)
    van, bs = stub_set(VANILLA), stub_set(BELIEF_STATE)
    play(van, default_factory(fin, env), env, 200, 2, "train")
    play(bs, default_factory(fin, env), env, 200, 2, "train")
    xv = van.policies[None].learner.inputs
    xb = bs.policies[None].learner.inputs
    assert len(xv) == len(xb) > 200
    for a, b in zip(xv, xb):
        assert np.array_equal(a, b[:-2])
        assert tuple(b[-2:]) in {(1.0, 0.0), (0.0, 1.0)}


def test_train_cell_freezes_and_counts(fin):
    env = get_environment(1)
    cell = train_cell(SEGMENTED, "DQN", env, fin, n_train=120, seed=0)
    assert len(cell.train_rewards) == 120
    assert sum(cell.segment_counts.values()) == 120
    for seg, p in cell.policies.policies.items():
        assert not p.training
        assert p.learner.dialogues == cell.segment_counts[seg]
