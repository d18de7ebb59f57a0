"""Episodic FSO/RF link-selection environment.

Each slot the agent picks one link. The weather advances, the chosen link is
scored +1/-1 from the slot's attenuation, and the score is pushed onto a
newest-first observation window. The link that was not chosen observes 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from fsorf.atmosphere import AtmosphereState, WeatherParams, initial_state, step_weather


class LinkId(enum.IntEnum):
    FSO = 0
    RF = 1


class UsageError(RuntimeError):
    """API called out of order (step before reset, step after done, ...)."""


@dataclass(frozen=True)
class EnvConfig:
    gamma_low_db_km: float = 100.0
    gamma_high_db_km: float = 120.0
    window_len: int = 16
    episode_len: int = 200
    k: int = 1

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("invalid EnvConfig: " + "; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not self.gamma_low_db_km < self.gamma_high_db_km:
            errors.append("gamma_low_db_km must be < gamma_high_db_km")
        if self.window_len < 1:
            errors.append("window_len must be >= 1")
        if self.episode_len < 1:
            errors.append("episode_len must be >= 1")
        if self.k != 1:
            errors.append("k must be 1 (single-link selection only)")
        return errors

    @property
    def obs_dim(self) -> int:
        return 2 * self.window_len


def link_value(link, gamma, cfg: EnvConfig):
    """+1 if ``link`` is the right choice for attenuation ``gamma``, else -1.

    FSO is right strictly below ``gamma_low``, RF at or above ``gamma_high``;
    inside the dead band both links score -1. Vectorises over ``gamma``.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be >= 0")
    if int(link) == LinkId.FSO:
        good = g < cfg.gamma_low_db_km
    else:
        good = g >= cfg.gamma_high_db_km
    out = np.where(good, 1, -1)
    return int(out) if out.ndim == 0 else out


def oracle_reward(gammas, cfg: EnvConfig) -> float:
    """Average per-slot reward of a clairvoyant single-link policy."""
    g = np.asarray(gammas, dtype=float)
    if g.size == 0:
        raise ValueError("empty attenuation trace")
    best = np.maximum(link_value(LinkId.FSO, g, cfg), link_value(LinkId.RF, g, cfg))
    return float(np.mean(best))


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: int
    gamma_db_km: float
    done: bool
    rssi_dbm: float


class LinkSwitchEnv:
    """Gym-style wrapper around the weather process.

    Observations are ``(window_len, 2)`` float arrays, row 0 newest, column
    ``LinkId``. The returned array is a fresh copy each call.
    """

    def __init__(self, cfg: EnvConfig | None = None, weather: WeatherParams | None = None, seed=None):
        self.cfg = cfg or EnvConfig()
        self.weather = weather or WeatherParams()
        self.rng = np.random.default_rng(self.weather.rng_seed if seed is None else seed)
        self._state: AtmosphereState | None = None
        self._window = np.zeros((self.cfg.window_len, 2))
        self._done = True
        self.gamma_trace: list[float] = []

    @property
    def state(self) -> AtmosphereState | None:
        return self._state

    @property
    def slot(self) -> int:
        return 0 if self._state is None else self._state.slot

    def reset(self, seed=None) -> np.ndarray:
        """Start a new episode in regime 0 with an all-zero window.

        ``seed`` reseeds the weather generator; otherwise the stream continues.
        """
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._state = initial_state(self.weather)
        self._window[:] = 0.0
        self._done = False
        self.gamma_trace = []
        return self._window.copy()

    def step(self, action) -> StepResult:
        if self._state is None:
            raise UsageError("step() called before reset()")
        if self._done:
            raise UsageError("step() called after the episode finished; call reset()")
        action = LinkId(int(action))
        self._state = step_weather(self._state, self.weather, self.rng)
        gamma = self._state.gamma_db_km
        reward = link_value(action, gamma, self.cfg)
        self._window[1:] = self._window[:-1]
        self._window[0] = 0.0
        self._window[0, action] = reward
        self._done = self._state.slot >= self.cfg.episode_len
        self.gamma_trace.append(gamma)
        return StepResult(self._window.copy(), reward, gamma, self._done, self._state.rssi_dbm)


def flatten(obs: np.ndarray) -> np.ndarray:
    """Slot-major flattening: ``[fso_0, rf_0, fso_1, rf_1, ...]``."""
    return np.asarray(obs, dtype=float).reshape(-1)
