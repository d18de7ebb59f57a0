import itertools

import numpy as np
import pytest

from fsorf.atmosphere import WeatherParams
from fsorf.environment import (EnvConfig, LinkId, LinkSwitchEnv, UsageError, flatten, link_value,
                               oracle_reward)

CFG = EnvConfig()


def test_link_enum_has_two_members():
    assert [int(x) for x in LinkId] == [0, 1]


@pytest.mark.parametrize("gamma,fso,rf", [
    (0.0, 1, -1), (50.0, 1, -1), (99.99, 1, -1), (100.0, -1, -1), (110.0, -1, -1),
    (119.99, -1, -1), (120.0, -1, 1), (125.0, -1, 1), (200.0, -1, 1),
])
def test_truth_table(gamma, fso, rf):
    assert link_value(LinkId.FSO, gamma, CFG) == fso
    assert link_value(LinkId.RF, gamma, CFG) == rf


def test_link_value_vectorises_and_rejects_negative():
    g = np.array([50, 110, 125])
    np.testing.assert_array_equal(link_value(LinkId.FSO, g, CFG), [1, -1, -1])
    np.testing.assert_array_equal(link_value(LinkId.RF, g, CFG), [-1, -1, 1])
    with pytest.raises(ValueError):
        link_value(LinkId.FSO, -1.0, CFG)


def test_oracle_examples():
    assert oracle_reward([50.0] * 7, CFG) == 1.0
    assert oracle_reward([110.0] * 7, CFG) == -1.0
    assert oracle_reward([50.0, 125.0, 110.0], CFG) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        oracle_reward([], CFG)


@pytest.mark.parametrize("kwargs", [
    dict(gamma_low_db_km=130.0), dict(window_len=0), dict(episode_len=0), dict(k=2),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EnvConfig(**kwargs)


def test_reset_gives_zero_window():
    env = LinkSwitchEnv(EnvConfig(window_len=5), seed=0)
    obs = env.reset()
    assert obs.shape == (5, 2)
    assert np.all(obs == 0)
    assert env.state.regime_index == 0
    assert env.slot == 0


def test_step_order_errors():
    env = LinkSwitchEnv(EnvConfig(episode_len=3), seed=0)
    with pytest.raises(UsageError):
        env.step(LinkId.FSO)
    env.reset()
    for i in range(3):
        res = env.step(LinkId.FSO)
        assert res.done == (i == 2)
    with pytest.raises(UsageError):
        env.step(LinkId.FSO)
    env.reset()
    assert not env.step(LinkId.RF).done


# a weather whose regimes sit below, inside and above the dead band
DEAD_BAND_WEATHER = WeatherParams(regimes=(("clear", 4.0e5), ("dust", 1.0e6), ("storm", 1.38e6)),
                                  regime_transition=0.3)


def test_rewards_follow_truth_table_and_window_shifts():
    g = DEAD_BAND_WEATHER.regime_gammas()
    assert g[0] < 100 <= g[1] < 120 <= g[2]
    env = LinkSwitchEnv(EnvConfig(window_len=4, episode_len=400), DEAD_BAND_WEATHER, seed=1)
    prev = env.reset()
    rng = np.random.default_rng(0)
    seen = set()
    while True:
        a = LinkId(int(rng.integers(2)))
        res = env.step(a)
        assert res.reward == link_value(a, res.gamma_db_km, env.cfg)
        seen.add((int(a), res.reward, round(res.gamma_db_km)))
        obs = res.observation
        assert set(np.unique(obs)) <= {-1.0, 0.0, 1.0}
        assert obs[0, a] == res.reward and obs[0, 1 - a] == 0
        assert np.count_nonzero(obs[0]) == 1
        np.testing.assert_array_equal(obs[1:], prev[:-1])
        prev = obs
        if res.done:
            break
    # every (link, regime) pair turned up, dead band included
    assert len({(a, gm) for a, _, gm in seen}) == 6


def test_episode_reward_range():
    env = LinkSwitchEnv(EnvConfig(episode_len=50), DEAD_BAND_WEATHER, seed=3)
    for _ in range(20):
        env.reset()
        total = sum(env.step(LinkId.RF).reward for _ in range(50))
        assert -50 <= total <= 50


def test_determinism():
    def trajectory(seed):
        env = LinkSwitchEnv(EnvConfig(episode_len=100), DEAD_BAND_WEATHER, seed=seed)
        env.reset()
        actions = itertools.cycle([0, 0, 1])
        return [env.step(next(actions)) for _ in range(100)]

    a, b = trajectory(9), trajectory(9)
    for x, y in zip(a, b):
        assert x.reward == y.reward and x.gamma_db_km == y.gamma_db_km and x.rssi_dbm == y.rssi_dbm
        np.testing.assert_array_equal(x.observation, y.observation)
    assert [s.gamma_db_km for s in trajectory(10)] != [s.gamma_db_km for s in a]


def test_reset_seed_restarts_stream():
    env = LinkSwitchEnv(EnvConfig(episode_len=30), DEAD_BAND_WEATHER)
    env.reset(seed=5)
    first = [env.step(0).gamma_db_km for _ in range(30)]
    env.reset(seed=5)
    assert [env.step(0).gamma_db_km for _ in range(30)] == first


def test_observation_is_a_copy():
    env = LinkSwitchEnv(seed=0)
    obs = env.reset()
    obs[0, 0] = 5
    assert env.step(0).observation[1, 0] == 0


def test_flatten_is_slot_major():
    obs = np.array([[1, 0], [0, -1], [-1, 0]])
    np.testing.assert_array_equal(flatten(obs), [1, 0, 0, -1, -1, 0])
