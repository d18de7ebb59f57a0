"""Multi-step RSSI forecasting on simulated channel traces.

The predictor is a small MLP from :mod:`fsorf.neural` trained on a residual
target: the inputs are the last ``window`` samples minus the newest one and
the output is the next step's change. Longer horizons come from feeding
predictions back in.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .atmosphere import WeatherParams, concentration_from_visibility, simulate
from .environment import UsageError
from .neural import MlpNetwork, MlpSpec, adam_step, masked_mse

SLOT_MINUTES = 5
# visibility multipliers of the three regimes around a scenario's nominal value
SCENARIO_SPREAD = (1.3, 1.0, 0.75)


@dataclass(frozen=True)
class RssiTrace:
    slot: np.ndarray
    rssi_dbm: np.ndarray
    visibility_km: np.ndarray

    def __post_init__(self):
        for name in ("slot", "rssi_dbm", "visibility_km"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        n = self.slot.shape[0]
        if self.rssi_dbm.shape != (n,) or self.visibility_km.shape != (n,):
            raise ValueError("trace columns must be 1-D and of equal length")
        if n > 1 and np.any(np.diff(self.slot) <= 0):
            raise ValueError("slots must be strictly increasing")
        if not (np.all(np.isfinite(self.rssi_dbm)) and np.all(np.isfinite(self.visibility_km))):
            raise ValueError("trace values must be finite")

    def __len__(self):
        return self.slot.shape[0]

    def split(self, train_fraction: float = 0.8) -> tuple["RssiTrace", "RssiTrace"]:
        """Chronological split; no shuffling."""
        cut = int(round(train_fraction * len(self)))
        return self[:cut], self[cut:]

    def __getitem__(self, sl: slice) -> "RssiTrace":
        return RssiTrace(self.slot[sl], self.rssi_dbm[sl], self.visibility_km[sl])


@dataclass(frozen=True)
class ForecastParams:
    window: int = 12
    horizons: int = 5
    train_fraction: float = 0.8
    n_slots: int = 3000
    hidden_dims: tuple = (32, 16)
    epochs: int = 40
    lr: float = 3e-3
    batch_size: int = 64
    visibilities_km: tuple = (30.0, 10.0, 5.0, 2.5, 1.5)
    noise_db: float = 0.1
    link_distance_km: float = 0.5
    fading_db: float = 0.3
    fading_corr: float = 0.98

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "visibilities_km", tuple(float(v) for v in self.visibilities_km))

    def validate(self) -> list[str]:
        errors = []
        for name in ("window", "horizons", "epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                errors.append(f"{name} must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            errors.append("train_fraction must be in (0, 1)")
        if self.n_slots < 2 * (self.window + self.horizons + 1):
            errors.append("n_slots too small for window and horizons")
        if not self.lr > 0:
            errors.append("lr must be > 0")
        if not self.visibilities_km or any(v <= 0 for v in self.visibilities_km):
            errors.append("visibilities_km must be non-empty and positive")
        if self.noise_db < 0:
            errors.append("noise_db must be >= 0")
        if self.link_distance_km <= 0:
            errors.append("link_distance_km must be > 0")
        if self.fading_db < 0:
            errors.append("fading_db must be >= 0")
        if not 0.0 <= self.fading_corr < 1.0:
            errors.append("fading_corr must be in [0, 1)")
        return errors


def scenario_weather(visibility_km: float, noise_db: float = 0.1,
                     link_distance_km: float = 0.5) -> WeatherParams:
    """Three regimes spread around ``visibility_km``; churn grows as visibility falls."""
    vis = np.array(SCENARIO_SPREAD) * visibility_km
    conc = concentration_from_visibility(vis)
    regimes = tuple((f"v{v:.3g}", float(c)) for v, c in zip(vis, conc))
    return WeatherParams(
        regimes=regimes,
        regime_transition=min(0.25, 0.3 / visibility_km),
        rssi_noise_db=noise_db,
        link_distance_km=link_distance_km,
    )


def scintillation(n_slots: int, sigma_db: float, corr: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) log-amplitude fading with standard deviation ``sigma_db``."""
    e = rng.standard_normal(n_slots) * sigma_db * np.sqrt(1.0 - corr * corr)
    e[0] = rng.standard_normal() * sigma_db
    return lfilter([1.0], [1.0, -corr], e)


def simulate_trace(weather: WeatherParams, n_slots: int, rng: np.random.Generator,
                   fading_db: float = 0.0, fading_corr: float = 0.98) -> RssiTrace:
    tr = simulate(weather, n_slots, rng)
    rssi = tr.rssi_dbm
    if fading_db > 0:
        rssi = rssi + scintillation(n_slots, fading_db, fading_corr, rng)
    return RssiTrace(tr.slot, rssi, tr.visibility_km)


def _windows(x: np.ndarray, window: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, window)


@dataclass
class Predictor:
    net: MlpNetwork
    window: int
    scale: float

    def predict_next(self, history) -> np.ndarray:
        """Next value for each row of ``history`` (oldest first, newest last)."""
        h = np.atleast_2d(np.asarray(history, dtype=float))
        last = h[:, -1:]
        out = self.net.predict((h - last) / self.scale)
        return last[:, 0] + out[:, 0] * self.scale

    def forecast(self, history, horizons: int) -> np.ndarray:
        """Recursive forecasts; column ``h-1`` is ``h`` steps ahead."""
        h = np.array(np.atleast_2d(history), dtype=float)
        preds = np.empty((h.shape[0], horizons))
        for k in range(horizons):
            nxt = self.predict_next(h)
            preds[:, k] = nxt
            h = np.concatenate([h[:, 1:], nxt[:, None]], axis=1)
        return preds


def fit(trace: RssiTrace, window: int = 12, params: ForecastParams | None = None,
        rng: np.random.Generator | int | None = 0) -> Predictor:
    p = params or ForecastParams(window=window)
    if len(trace) <= window + p.horizons:
        raise UsageError(f"trace of {len(trace)} samples is too short for window {window} "
                         f"and {p.horizons} horizons")
    rng = np.random.default_rng(rng)
    x = trace.rssi_dbm.astype(float)
    hist = _windows(x[:-1], window)
    rel = hist - hist[:, -1:]
    target = x[window:] - hist[:, -1]
    scale = float(np.std(np.diff(x)))
    scale = scale if scale > 1e-6 else 1.0
    inputs = rel / scale
    targets = target / scale

    net = MlpNetwork(MlpSpec(window, 1, p.hidden_dims, "float64"), rng)
    zeros = np.zeros(p.batch_size, dtype=np.int64)
    n = inputs.shape[0]
    for _ in range(p.epochs):
        order = rng.permutation(n)
        for start in range(0, n, p.batch_size):
            idx = order[start:start + p.batch_size]
            out, _ = net.forward(inputs[idx])
            _, g = masked_mse(out, targets[idx], zeros[:idx.size])
            adam_step(net, net.backward(g), p.lr)
    return Predictor(net, window, scale)


@dataclass
class ForecastReport:
    """MAE per horizon and one-step absolute errors, keyed by visibility (km)."""

    horizons: int
    mae: dict = field(default_factory=dict)
    ae: dict = field(default_factory=dict)
    ae_by_horizon: dict = field(default_factory=dict)

    def merge(self, other: "ForecastReport") -> "ForecastReport":
        if other.horizons != self.horizons:
            raise ValueError("cannot merge reports with different horizons")
        return ForecastReport(self.horizons, {**self.mae, **other.mae}, {**self.ae, **other.ae},
                              {**self.ae_by_horizon, **other.ae_by_horizon})

    def cdf(self, key, thresholds) -> np.ndarray:
        """Fraction of one-step AE samples at or below each threshold."""
        ae = np.sort(self.ae[key])
        return np.searchsorted(ae, np.asarray(thresholds, dtype=float), side="right") / ae.size

    def thresholds(self, step: float = 0.05) -> np.ndarray:
        top = max(float(np.max(a)) for a in self.ae.values())
        n = int(np.ceil(top / step - 1e-9))
        return np.round(np.arange(n + 1) * step, 10)

    def cdf_table(self, step: float = 0.05) -> list[tuple[float, float, float]]:
        th = self.thresholds(step)
        rows = []
        for key in self.ae:
            rows.extend(zip([key] * th.size, th.tolist(), self.cdf(key, th).tolist()))
        return rows


def evaluate(predictor, trace: RssiTrace, horizons: int = 5, key=None) -> ForecastReport:
    """Score every anchor that has ``window`` samples of history and ``horizons`` of truth.

    ``predictor`` needs ``window`` and ``forecast(history, horizons)``.
    """
    w = predictor.window
    x = trace.rssi_dbm.astype(float)
    n_anchor = len(trace) - w - horizons + 1
    if n_anchor < 1:
        raise UsageError("evaluation trace shorter than window + horizons")
    hist = _windows(x, w)[:n_anchor]
    truth = np.stack([x[w + k:w + k + n_anchor] for k in range(horizons)], axis=1)
    err = np.abs(predictor.forecast(hist, horizons) - truth)
    if key is None:
        key = float(np.median(trace.visibility_km))
    return ForecastReport(horizons, {key: err.mean(axis=0)}, {key: err[:, 0].copy()}, {key: err})


def study(params: ForecastParams | None = None, seed: int = 0) -> ForecastReport:
    """Fit and score one predictor per visibility scenario."""
    p = params or ForecastParams()
    report = ForecastReport(p.horizons)
    for i, vis in enumerate(p.visibilities_km):
        ss = np.random.SeedSequence([int(seed), i])
        trace_rng, fit_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        weather = scenario_weather(vis, p.noise_db, p.link_distance_km)
        train, test = simulate_trace(weather, p.n_slots, trace_rng, p.fading_db, p.fading_corr).split(p.train_fraction)
        pred = fit(train, p.window, p, fit_rng)
        report = report.merge(evaluate(pred, test, p.horizons, key=vis))
    return report


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def write_mae_csv(report: ForecastReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["visibility_km", "horizon", "minutes", "mae_dbm"])
        for key, mae in report.mae.items():
            for h, m in enumerate(mae, start=1):
                w.writerow([_fmt(key), h, h * SLOT_MINUTES, _fmt(m)])
    return path


def write_cdf_csv(report: ForecastReport, path, step: float = 0.05) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["visibility_km", "ae_threshold_dbm", "fraction"])
        for key, th, frac in report.cdf_table(step):
            w.writerow([_fmt(key), _fmt(th), _fmt(frac)])
    return path
