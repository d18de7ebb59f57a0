import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsorf.atmosphere import WeatherParams
from fsorf.environment import EnvConfig, LinkId, LinkSwitchEnv
from fsorf.myopic import Belief, MyopicAgent, propagate, select, update


def test_select_argmax():
    assert select(Belief(0.9, 0.2, 0.1)) == LinkId.FSO
    assert select(Belief(0.2, 0.9, 0.1)) == LinkId.RF


def test_tie_alternates_from_previous():
    b = Belief(0.5, 0.5, 0.5)
    assert select(b, LinkId.FSO) == LinkId.RF
    assert select(b, LinkId.RF) == LinkId.FSO
    assert select(b) == LinkId.FSO


def test_propagation_examples():
    assert propagate(1.0, 0.1) == pytest.approx(0.9)
    assert propagate(0.0, 0.5) == 0.5 and propagate(1.0, 0.5) == 0.5


def test_half_flip_probability_resets_beliefs():
    for r in (-1, 1):
        for link in LinkId:
            b = update(Belief(0.3, 0.8, 0.5), link, r)
            assert b.fso_ready == 0.5 and b.rf_ready == 0.5


def test_zero_flip_probability_freezes_belief():
    b = update(Belief(0.5, 0.5, 0.0), LinkId.FSO, 1)
    b = update(b, LinkId.RF, -1)
    assert (b.fso_ready, b.rf_ready) == (1.0, 0.0)
    for _ in range(10):
        b = update(b, LinkId.FSO, 1)
        assert (b.fso_ready, b.rf_ready) == (1.0, 0.0)


def test_update_rejects_bad_reward():
    with pytest.raises(ValueError):
        update(Belief(), LinkId.FSO, 0)


def test_components_pair_up():
    c = Belief(0.7, 0.2, 0.1).components
    np.testing.assert_allclose(c, [0.7, 0.8, 0.2, 0.3])
    assert c[0] + c[3] == 1.0 and c[1] + c[2] == 1.0


@given(st.floats(0, 1), st.lists(st.tuples(st.sampled_from([0, 1]), st.sampled_from([-1, 1])), max_size=50))
def test_belief_stays_in_unit_interval(p, history):
    b = Belief(0.5, 0.5, p)
    for link, r in history:
        b = update(b, link, r)
        assert 0 <= b.fso_ready <= 1 and 0 <= b.rf_ready <= 1


def test_round_robin_at_half():
    env = LinkSwitchEnv(EnvConfig(episode_len=10_000), WeatherParams(regime_transition=0.1), seed=0)
    agent = MyopicAgent(0.5)
    obs = env.reset()
    agent.begin_episode()
    picks = []
    for _ in range(10_000):
        a = agent.act(obs)
        res = env.step(a)
        agent.observe(obs, a, res.reward, res.observation)
        obs = res.observation
        picks.append(int(a))
    picks = np.array(picks)
    assert picks[0] == LinkId.FSO
    assert np.all(picks[1:] != picks[:-1])
    assert abs(picks.mean() - 0.5) <= 0.01 * 0.5
    assert agent.policy_switch_count == 9_999


def test_low_flip_probability_follows_observations():
    agent = MyopicAgent(0.05)
    agent.begin_episode()
    a = agent.act(None)
    agent.observe(None, a, -1, None)  # FSO failed
    assert agent.act(None) == LinkId.RF
    agent.observe(None, LinkId.RF, 1, None)
    assert agent.act(None) == LinkId.RF
