"""Dust-driven atmospheric channel: visibility, attenuation and a regime chain.

Physical relations (Kruse/Kim family):

* visibility   ``V = 7080 * C**-0.8``              (km, C in g/m^3)
* size factor  ``q(V)``: 1.6 above 50 km, 1.3 on (6, 50], ``0.58 V**(1/3)`` up to 6 km
* attenuation  ``gamma = 10 log10(e) * 3.912 / V * (lambda / 0.55) ** -q``  (dB/km)
* transmission ``tau = exp(-3.91 / V * (lambda / 0.55) ** q * R)``

Weather evolves as a birth-death Markov chain over named regimes, each pinned
to one dust concentration. Every slot consumes exactly three uniforms from the
caller's generator (move?, direction, RSSI noise) so that :func:`simulate`
can draw a whole trace in one block and still match repeated
:func:`step_weather` calls bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import ndtri

from fsorf import _kernels

LOG10_E_DB = 10.0 * math.log10(math.e)
REF_WAVELENGTH_UM = 0.55

# gamma at 1.55 um: ~50, ~80 and ~150 dB/km
DEFAULT_REGIMES = (
    ("clear", 4.0e5),
    ("haze", 6.75e5),
    ("storm", 1.38e6),
)


class DomainError(ValueError):
    """An input lies outside the domain of a channel formula."""


def _positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite and > 0, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def visibility_from_concentration(c):
    """Visibility in km for dust concentration ``c`` (g/m^3). Accepts arrays."""
    c = _positive("concentration", c)
    return _out(7080.0 * c**-0.8)


def concentration_from_visibility(v):
    """Inverse of :func:`visibility_from_concentration`."""
    v = _positive("visibility", v)
    return _out((v / 7080.0) ** -1.25)


def q_exponent(v):
    """Particle size-distribution exponent for visibility ``v`` in km.

    Boundaries: ``v == 50`` takes 1.3 and ``v == 6`` takes the cube-root branch.
    """
    v = _positive("visibility", v)
    q = np.where(v > 50.0, 1.6, np.where(v > 6.0, 1.3, 0.58 * np.cbrt(v)))
    return _out(q)


def specific_attenuation(v, lambda_um):
    """Specific attenuation in dB/km."""
    v = _positive("visibility", v)
    lam = _positive("wavelength", lambda_um)
    q = np.asarray(q_exponent(v))
    return _out(LOG10_E_DB * (3.912 / v) * (lam / REF_WAVELENGTH_UM) ** -q)


def scattering_transmission(c, lambda_um, range_km):
    """Fraction of power surviving Mie scattering over ``range_km``, in (0, 1]."""
    c = _positive("concentration", c)
    lam = _positive("wavelength", lambda_um)
    rng_km = _positive("range", range_km)
    v = 7080.0 * c**-0.8
    q = np.asarray(q_exponent(v))
    return _out(np.exp((-3.91 / v) * (lam / REF_WAVELENGTH_UM) ** q * rng_km))


def attenuation_from_concentration(c, lambda_um):
    return specific_attenuation(visibility_from_concentration(c), lambda_um)


@dataclass(frozen=True)
class WeatherParams:
    lambda_um: float = 1.55
    link_distance_km: float = 0.5
    tx_power_dbm: float = 20.0
    regime_transition: float = 0.02
    regimes: tuple = DEFAULT_REGIMES
    rssi_noise_db: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple((str(n), float(c)) for n, c in self.regimes))
        errors = self.validate()
        if errors:
            raise ValueError("invalid WeatherParams: " + "; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not self.lambda_um > 0:
            errors.append("lambda_um must be > 0")
        if not self.link_distance_km > 0:
            errors.append("link_distance_km must be > 0")
        if not 0.0 <= self.regime_transition <= 1.0:
            errors.append("regime_transition must lie in [0, 1]")
        if not self.rssi_noise_db >= 0:
            errors.append("rssi_noise_db must be >= 0")
        if not self.regimes:
            errors.append("regimes must be non-empty")
        else:
            conc = [c for _, c in self.regimes]
            if any(not c > 0 for c in conc):
                errors.append("regime concentrations must be > 0")
            if any(b <= a for a, b in zip(conc, conc[1:])):
                errors.append("regime concentrations must be strictly increasing")
        return errors

    @property
    def concentrations(self) -> np.ndarray:
        return np.array([c for _, c in self.regimes])

    @property
    def regime_names(self) -> list[str]:
        return [n for n, _ in self.regimes]

    @cached_property
    def _regime_table(self):
        conc = self.concentrations
        vis = 7080.0 * conc**-0.8
        gamma = np.asarray(specific_attenuation(vis, self.lambda_um), dtype=float).reshape(-1)
        return conc, vis, gamma

    def regime_gammas(self) -> np.ndarray:
        """Specific attenuation of every regime, dB/km."""
        return self._regime_table[2].copy()

    def with_(self, **changes) -> "WeatherParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AtmosphereState:
    regime_index: int
    concentration_g_m3: float
    visibility_km: float
    gamma_db_km: float
    rssi_dbm: float
    slot: int = 0


def _state_for(params: WeatherParams, regime: int, slot: int, noise: float) -> AtmosphereState:
    conc, vis, gam = params._regime_table
    c, v, gamma = float(conc[regime]), float(vis[regime]), float(gam[regime])
    rssi = params.tx_power_dbm - gamma * params.link_distance_km + noise
    return AtmosphereState(regime, c, v, gamma, rssi, slot)


def initial_state(params: WeatherParams, regime_index: int = 0) -> AtmosphereState:
    """Noise-free state at slot 0."""
    if not 0 <= regime_index < len(params.regimes):
        raise IndexError(f"regime_index {regime_index} out of range")
    return _state_for(params, regime_index, 0, 0.0)


def _noise(params, u):
    if params.rssi_noise_db == 0:
        return np.zeros_like(u)
    # ndtri(0) is -inf; random() can return exactly 0.0
    return params.rssi_noise_db * ndtri(np.maximum(u, 1e-300))


def next_regime(r: int, n_regimes: int, p_move: float, u_move: float, u_dir: float) -> int:
    """Scalar twin of ``_kernels.birth_death_path`` for a single step."""
    if n_regimes > 1 and u_move < p_move:
        if r == 0:
            return 1
        if r == n_regimes - 1:
            return r - 1
        return r - 1 if u_dir < 0.5 else r + 1
    return r


def step_weather(state: AtmosphereState, params: WeatherParams, rng: np.random.Generator) -> AtmosphereState:
    """Advance the weather by one slot."""
    u_move, u_dir, u_noise = rng.random(3)
    r = next_regime(state.regime_index, len(params.regimes), params.regime_transition, u_move, u_dir)
    return _state_for(params, r, state.slot + 1, float(_noise(params, u_noise)))


@dataclass
class WeatherTrace:
    """Column arrays for ``n`` consecutive slots after the starting state."""

    slot: np.ndarray
    regime_index: np.ndarray
    visibility_km: np.ndarray
    gamma_db_km: np.ndarray
    rssi_dbm: np.ndarray
    names: list = field(default_factory=list)

    def __len__(self):
        return self.slot.shape[0]


def simulate(params: WeatherParams, n_slots: int, rng: np.random.Generator,
             start: AtmosphereState | None = None) -> WeatherTrace:
    """Vectorised equivalent of ``n_slots`` successive :func:`step_weather` calls."""
    start = start or initial_state(params)
    u = rng.random((n_slots, 3))
    path = _kernels.birth_death_path(
        start.regime_index, len(params.regimes), params.regime_transition,
        np.ascontiguousarray(u[:, 0]), np.ascontiguousarray(u[:, 1]),
    )
    _, vis_table, gamma_table = params._regime_table
    vis = vis_table[path]
    gamma = gamma_table[path]
    rssi = params.tx_power_dbm - gamma * params.link_distance_km + _noise(params, u[:, 2])
    slots = start.slot + 1 + np.arange(n_slots)
    return WeatherTrace(slots, path, vis, gamma, rssi, params.regime_names)


def stationary_distribution(n_regimes: int, p_move: float) -> np.ndarray:
    """Stationary law of the clamped birth-death chain (closed form).

    Detailed balance gives weight 1 to the two end regimes and 2 to each
    interior regime; ``p_move`` cancels unless it is zero.
    """
    if n_regimes == 1:
        return np.ones(1)
    w = np.full(n_regimes, 2.0)
    w[0] = w[-1] = 1.0
    return w / w.sum()
