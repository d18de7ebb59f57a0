"""Replay-buffer DQN with a hard-synced target network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fsorf.environment import LinkId, flatten
from fsorf.neural import (AdamState, MlpNetwork, MlpSpec, TemperatureSchedule, adam_step,
                          boltzmann_sample, masked_mse)


class ReplayBuffer:
    """FIFO ring buffer of ``(state, action, reward, next_state)``.

    Storage grows geometrically up to ``capacity`` so a large nominal capacity
    costs nothing until it is used. States are stored as ``state_dtype``
    (int8 by default, which is lossless for the -1/0/+1 observation code).
    """

    def __init__(self, capacity: int, state_dim: int, state_dtype=np.int8):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self._alloc = min(self.capacity, 1024)
        self.states = np.zeros((self._alloc, state_dim), dtype=state_dtype)
        self.next_states = np.zeros((self._alloc, state_dim), dtype=state_dtype)
        self.actions = np.zeros(self._alloc, dtype=np.int64)
        self.rewards = np.zeros(self._alloc, dtype=np.float64)
        self._size = 0
        self._head = 0

    def __len__(self):
        return self._size

    def _grow(self):
        new = min(self.capacity, 2 * self._alloc)
        for name in ("states", "next_states", "actions", "rewards"):
            old = getattr(self, name)
            arr = np.zeros((new, *old.shape[1:]), dtype=old.dtype)
            arr[: self._alloc] = old
            setattr(self, name, arr)
        self._alloc = new

    def push(self, state, action, reward, next_state) -> None:
        if self._head == self._alloc and self._alloc < self.capacity:
            self._grow()
        i = self._head
        self.states[i] = state
        self.next_states[i] = next_state
        self.actions[i] = int(action)
        self.rewards[i] = reward
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample with replacement: ``(s, a, r, s_next)`` arrays."""
        idx = self.indices(batch_size, rng)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]

    def sample_states(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return self.states[self.indices(batch_size, rng)]

    def ordered(self):
        """All stored transitions, oldest first."""
        if self._size < self.capacity:
            order = np.arange(self._size)
        else:
            order = (self._head + np.arange(self.capacity)) % self.capacity
        return self.states[order], self.actions[order], self.rewards[order], self.next_states[order]


def q_update_tabular(q_table: np.ndarray, s: int, a: int, r: float, s_next: int,
                     alpha: float, discount: float) -> np.ndarray:
    """One Q-learning backup, in place; returns the table for chaining."""
    target = r + discount * q_table[s_next].max()
    q_table[s, a] += alpha * (target - q_table[s, a])
    return q_table


class LookupTable:
    """Tabular stand-in for :class:`MlpNetwork` over an enumerated state set.

    Supports the subset of the network API the DQN agent touches, so the
    agent's learning rule can be checked against an exact tabular solution.
    Features are one-hot state indicators.
    """

    def __init__(self, states, n_actions: int = 2):
        self.states = [tuple(np.asarray(s, dtype=float).reshape(-1)) for s in states]
        self.index = {s: i for i, s in enumerate(self.states)}
        self.n_actions = n_actions
        self.dtype = np.dtype(np.float64)
        self.params = np.zeros(len(self.states) * n_actions)
        self.table = self.params.reshape(len(self.states), n_actions)
        self.adam: AdamState | None = None
        self.spec = ("lookup", tuple(self.states), n_actions)
        self._rows = None

    def _rows_for(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.array([self.index[tuple(row)] for row in x])

    def forward(self, x, cache: bool = True):
        single = np.ndim(x) == 1
        rows = self._rows_for(x)
        if cache:
            self._rows = rows
        out = self.table[rows].copy()
        feats = np.eye(len(self.states))[rows]
        return (out[0], feats[0]) if single else (out, feats)

    def predict(self, x):
        return self.forward(x, cache=False)[0]

    def features(self, x):
        return self.forward(x, cache=False)[1]

    def backward(self, grad_out):
        if self._rows is None:
            raise RuntimeError("backward() called before forward()")
        g = np.zeros_like(self.table)
        np.add.at(g, self._rows, np.atleast_2d(grad_out))
        return g.reshape(-1)

    def copy_from(self, other):
        self.params[...] = other.params

    def clone(self):
        twin = LookupTable(self.states, self.n_actions)
        twin.params[...] = self.params
        return twin


@dataclass(frozen=True)
class DqnParams:
    hidden_dims: tuple = (300, 200, 100)
    lr: float = 1e-4
    batch_size: int = 32
    discount: float = 0.9
    buffer_capacity: int = 1_000_000
    sync_period: int = 200
    warmup: int = 1000
    learn_every: int = 1
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    temperature_decay_fraction: float = 0.8
    temperature_decay_steps: int | None = None
    dtype: str = "float32"

    def validate(self) -> list[str]:
        errors = []
        if not self.lr > 0:
            errors.append("lr must be > 0")
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if not 0 <= self.discount < 1:
            errors.append("discount must lie in [0, 1)")
        if self.buffer_capacity < self.batch_size:
            errors.append("buffer_capacity must be >= batch_size")
        if self.sync_period < 1:
            errors.append("sync_period must be >= 1")
        if self.warmup < 0:
            errors.append("warmup must be >= 0")
        if self.learn_every < 1:
            errors.append("learn_every must be >= 1")
        if not 0 < self.temperature_end <= self.temperature_start:
            errors.append("temperatures must satisfy 0 < temperature_end <= temperature_start")
        if not 0 < self.temperature_decay_fraction <= 1:
            errors.append("temperature_decay_fraction must lie in (0, 1]")
        if self.temperature_decay_steps is not None and self.temperature_decay_steps < 1:
            errors.append("temperature_decay_steps must be >= 1 when set")
        return errors

    def decay_steps_for(self, total_env_steps: int) -> int:
        if self.temperature_decay_steps is not None:
            return int(self.temperature_decay_steps)
        return max(1, int(round(self.temperature_decay_fraction * total_env_steps)))


class DqnAgent:
    """Q-network, target network and replay buffer.

    ``policy_switch_count`` counts target-network syncs; each sync is one
    change of the deployed policy. With ``periodic_sync`` the target is
    copied every ``sync_period`` learn steps.
    """

    kind = "dqn"
    periodic_sync = True
    switch_scope = "run"

    def __init__(self, obs_dim: int, params: DqnParams | None = None, rng=None,
                 total_env_steps: int = 120_000, q_net=None):
        self.params = p = params or DqnParams()
        self.rng = rng if rng is not None else np.random.default_rng()
        if q_net is None:
            q_net = MlpNetwork(MlpSpec(obs_dim, 2, p.hidden_dims, p.dtype), self.rng)
        self.q_net = q_net
        self.target_net = q_net.clone()
        self.buffer = ReplayBuffer(p.buffer_capacity, obs_dim)
        self.schedule = TemperatureSchedule(p.temperature_start, p.temperature_end,
                                            p.decay_steps_for(total_env_steps))
        self.env_steps = 0
        self.learn_steps = 0
        self.policy_switch_count = 0
        self.last_td_errors = None

    @property
    def temperature(self) -> float:
        return self.schedule(self.env_steps)

    def q_values(self, obs) -> np.ndarray:
        return np.asarray(self.q_net.predict(flatten(obs)), dtype=float)

    def act(self, obs, rng, temperature: float | None = None) -> LinkId:
        tau = self.temperature if temperature is None else temperature
        return LinkId(boltzmann_sample(self.q_values(obs), tau, rng))

    def remember(self, obs, action, reward, next_obs) -> None:
        self.buffer.push(flatten(obs), action, reward, flatten(next_obs))

    def learn_step(self):
        """One Adam step on a uniform mini-batch; ``None`` if the buffer is too small."""
        p = self.params
        if len(self.buffer) < p.batch_size:
            return None
        s, a, r, s_next = self.buffer.sample(p.batch_size, self.rng)
        q_next = np.asarray(self.target_net.predict(s_next), dtype=float)
        targets = r + p.discount * q_next.max(axis=1)
        out, _ = self.q_net.forward(s)
        loss, grad = masked_mse(np.asarray(out, dtype=float), targets, a)
        adam_step(self.q_net, self.q_net.backward(grad), p.lr)
        self.last_td_errors = targets - np.asarray(out, dtype=float)[np.arange(a.size), a]
        self.learn_steps += 1
        return loss

    def sync(self) -> None:
        self.target_net.copy_from(self.q_net)
        self.policy_switch_count += 1

    def maybe_sync(self, step_count: int) -> bool:
        if step_count % self.params.sync_period == 0:
            self.sync()
            return True
        return False

    # harness protocol
    def begin_episode(self):
        pass

    def policy_marker(self):
        """Fingerprint of the deployed (target) network's output layer.

        Every learn step moves the output layer, so a sync always changes it.
        """
        net = self.target_net
        if hasattr(net, "weights"):
            return net.weights[-1].tobytes() + net.biases[-1].tobytes()
        return net.params.tobytes()

    def observe(self, obs, action, reward, next_obs):
        self.remember(obs, action, reward, next_obs)
        self.env_steps += 1
        p = self.params
        if len(self.buffer) < max(p.warmup, p.batch_size) or self.env_steps % p.learn_every:
            return None
        loss = self.learn_step()
        if loss is not None and self.periodic_sync:
            self.maybe_sync(self.learn_steps)
        return loss

    def end_episode(self):
        return None
