import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcgraph.catalog import FAMILIES, category_id
from funcgraph.env import (
    InteractionEnv,
    LogRecord,
    effects_from_bits,
    read_log,
    reward_of,
    write_log,
)
from funcgraph.generator import generate_scene
from funcgraph.scene import Role

from oracles import reward_direct


@pytest.fixture(scope="module")
def scene():
    for seed in range(50):
        s = generate_scene(FAMILIES["kitchen"], seed, num_points=8)
        if any(o.category_id == category_id("microwave") for o in s.objects):
            return s


def test_reward_correct_belief_no_effect():
    assert reward_of(np.zeros((2, 2)), 0, np.zeros(2)) == -1.0


def test_reward_half_belief_on_effect():
    b = np.array([[0.5, 0.0], [0, 0]])
    assert reward_of(b, 0, np.array([1, 0])) == 1.0


def test_reward_confident_false_positive():
    b = np.array([[1.0, 0.0], [0, 0]])
    assert reward_of(b, 0, np.array([0, 0])) == 1.0


def test_reward_randomized_against_direct():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        b = rng.uniform(size=(n, n))
        e = rng.uniform(size=n) < 0.3
        i = int(rng.integers(n))
        assert reward_of(b, i, e) == reward_direct(b[i], e)


@given(st.integers(0, 10**6), st.integers(1, 10))
def test_reward_bounds(seed, n):
    rng = np.random.default_rng(seed)
    b = rng.uniform(size=(n, n)) * (rng.uniform() < 0.5) + (rng.uniform(size=(n, n)) < 0.5) * (rng.uniform() < 0.5)
    b = np.clip(b, 0, 1)
    e = rng.uniform(size=n) < 0.4
    assert -1.0 <= reward_of(b, 0, e) <= 2.0


def test_reset_validation(scene):
    env = InteractionEnv(scene)
    bad = np.full((scene.n, scene.n), 0.5)
    bad[0, 0] = 1.2
    with pytest.raises(ValueError):
        env.reset(bad)
    with pytest.raises(ValueError):
        env.reset(np.full((scene.n + 1, scene.n + 1), 0.5))
    with pytest.raises(RuntimeError):
        InteractionEnv(scene).step(0)


def test_reset_all_half_and_repeatable(scene):
    env = InteractionEnv(scene)
    a = env.reset(np.full((scene.n, scene.n), 0.5), budget=4)
    b = env.reset(np.full((scene.n, scene.n), 0.5), budget=4)
    assert a.t == b.t == 0 and a.interacted == b.interacted == ()
    assert a.budget == b.budget == 4
    np.testing.assert_array_equal(a.belief, b.belief)


def test_step_semantics(scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5), budget=2)
    bg = next(k for k, o in enumerate(scene.objects) if o.roles == Role.BACKGROUND)
    r = env.step(bg)
    assert not r.observation.effects.any()
    assert r.reward == pytest.approx(2 * 0.5 - 1)
    assert r.state.budget == 1 and r.state.t == 1 and r.state.interacted == (bg,)
    mw = next(k for k, o in enumerate(scene.objects) if o.category_id == category_id("microwave"))
    r = env.step(mw)
    assert r.observation.effects[mw] and r.terminal
    np.testing.assert_array_equal(r.state.belief[mw], scene.adjacency[mw])


def test_exhausted_budget_is_terminal_without_change(scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5), budget=1)
    env.step(0)
    before = env.state
    r = env.step(1)
    assert r.terminal and r.observation is None and r.reward == 0.0
    assert env.state is before


def test_out_of_range_rejected(scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5))
    for bad in (-1, scene.n):
        with pytest.raises(IndexError):
            env.step(bad)
    assert env.state.t == 0


def test_union_of_rows_is_ground_truth(scene):
    env = InteractionEnv(scene)
    env.reset(np.zeros((scene.n, scene.n)))
    got = np.zeros_like(scene.adjacency)
    for i in range(scene.n):
        got[i] = env.step(i).observation.effects
    np.testing.assert_array_equal(got, scene.adjacency)
    np.testing.assert_array_equal(env.state.belief, scene.adjacency.astype(float))


def test_repeat_trigger_idempotent(scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5))
    a = env.step(3).observation.effects
    b = env.step(3).observation.effects
    np.testing.assert_array_equal(a, b)
    assert env.state.interacted == (3,) and env.state.t == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 12), st.lists(st.integers(0, 100), max_size=20))
def test_budget_conservation(budget, actions):
    s = generate_scene(FAMILIES["bedroom"], 1, num_points=8)
    env = InteractionEnv(s)
    env.reset(np.full((s.n, s.n), 0.5), budget=budget)
    for a in actions:
        if env.step(a % s.n).terminal:
            break
    assert env.state.t + env.state.budget == budget


def test_set_belief_keeps_observed_rows(scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5))
    env.step(2)
    env.set_belief(np.full((scene.n, scene.n), 0.3))
    np.testing.assert_array_equal(env.state.belief[2], scene.adjacency[2])
    assert env.state.belief[0, 0] == 0.3


def test_log_round_trip(tmp_path, scene):
    env = InteractionEnv(scene)
    env.reset(np.full((scene.n, scene.n), 0.5))
    records = []
    for t, i in enumerate((4, 0, 2)):
        belief = env.state.belief.copy()
        r = env.step(i)
        records.append(LogRecord(scene.scene_id, t, i, r.observation.bitstring(), r.reward))
        assert reward_of(belief, i, effects_from_bits(r.observation.bitstring())) == r.reward
    write_log(records, tmp_path / "log.jsonl")
    assert read_log(tmp_path / "log.jsonl") == records
