"""A small dense-network kernel: ReLU hidden layers, linear head.

All weights and biases of a network live in one flat ``params`` vector; the
per-layer matrices are views into it. That keeps optimiser updates, target
network copies and snapshots to a single array operation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fsorf import _kernels

WEIGHTS_MAGIC = b"FSORF-MLP v1\n"


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_dims: tuple = (300, 200, 100)
    dtype: str = "float64"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer widths must be >= 1, got {dims}")

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def n_params(self) -> int:
        d = self.dims
        return sum(a * b + b for a, b in zip(d[:-1], d[1:]))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class MlpNetwork:
    """Feedforward approximator.

    ``forward`` accepts a single input vector or a ``(batch, input_dim)``
    matrix and returns ``(output, features)`` where ``features`` are the last
    hidden layer's activations.
    """

    def __init__(self, spec: MlpSpec, rng: np.random.Generator | None = None):
        self.spec = spec
        self.dtype = np.dtype(spec.dtype)
        self.params = np.zeros(spec.n_params, dtype=self.dtype)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self._slices = []
        offset = 0
        for fan_in, fan_out in zip(spec.dims[:-1], spec.dims[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset = w.stop
            b = slice(offset, offset + fan_out)
            offset = b.stop
            self._slices.append((w, (fan_in, fan_out), b))
            self.weights.append(self.params[w].reshape(fan_in, fan_out))
            self.biases.append(self.params[b])
        self.adam: AdamState | None = None
        self._acts: list[np.ndarray] | None = None
        if rng is not None:
            self.init_xavier(rng)

    def init_xavier(self, rng: np.random.Generator) -> None:
        """Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""
        for w in self.weights:
            bound = 1.0 / math.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape).astype(self.dtype)
        for b in self.biases:
            b[...] = 0.0

    # -- inference -----------------------------------------------------

    def forward(self, x, cache: bool = True):
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected input width {self.spec.input_dim}, got shape {np.shape(x)}")
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w
            h += b
            if i < last:
                np.maximum(h, 0.0, out=h)
            acts.append(h)
        if cache:
            self._acts = acts
        out = acts[-1]
        feats = acts[-2]
        if single:
            return out[0], feats[0]
        return out, feats

    def predict(self, x) -> np.ndarray:
        return self.forward(x, cache=False)[0]

    def features(self, x) -> np.ndarray:
        return self.forward(x, cache=False)[1]

    # -- training ------------------------------------------------------

    def backward(self, grad_out) -> np.ndarray:
        """Flat gradient of a loss given dLoss/dOutput for the cached forward pass."""
        if self._acts is None:
            raise RuntimeError("backward() called before forward()")
        acts = self._acts
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        if g.shape != acts[-1].shape:
            raise ValueError(f"grad shape {g.shape} does not match output shape {acts[-1].shape}")
        grads = np.empty_like(self.params)
        for i in range(len(self.weights) - 1, -1, -1):
            w_sl, w_shape, b_sl = self._slices[i]
            np.dot(acts[i].T, g, out=grads[w_sl].reshape(w_shape))
            grads[b_sl] = g.sum(axis=0)
            if i > 0:
                g = g @ self.weights[i].T
                g *= acts[i] > 0.0
        return grads

    def copy_from(self, other: "MlpNetwork") -> None:
        if other.spec != self.spec:
            raise ValueError("network shapes differ")
        self.params[...] = other.params

    def clone(self) -> "MlpNetwork":
        twin = MlpNetwork(self.spec)
        twin.params[...] = self.params
        return twin


def masked_mse(output: np.ndarray, targets, actions):
    """Mean squared error on the taken action's unit only.

    Returns ``(loss, dLoss/dOutput)``; the gradient is zero on every other unit.
    """
    output = np.atleast_2d(output)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    n = output.shape[0]
    rows = np.arange(n)
    err = output[rows, actions] - targets
    grad = np.zeros_like(output)
    grad[rows, actions] = 2.0 * err / n
    return float(np.mean(err * err)), grad


def backward_mse(net: MlpNetwork, x, targets, actions):
    """Forward ``x``, score it with :func:`masked_mse` and backpropagate."""
    out, _ = net.forward(np.atleast_2d(np.asarray(x, dtype=float)))
    loss, g = masked_mse(out, targets, actions)
    return loss, net.backward(g)


def adam_step(net: MlpNetwork, grads: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    if net.adam is None:
        net.adam = AdamState(np.zeros_like(net.params), np.zeros_like(net.params))
    st = net.adam
    st.step += 1
    grads = np.ascontiguousarray(grads, dtype=net.dtype)
    _kernels.adam_update(net.params, grads, st.m, st.v, float(lr), float(beta1), float(beta2), float(eps), st.step)


def sgd_step(net: MlpNetwork, grads: np.ndarray, lr: float) -> None:
    net.params -= lr * grads


def softmax(z, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=float) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def boltzmann_probs(q_values, temperature: float) -> np.ndarray:
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    return softmax(q_values, temperature)


def boltzmann_sample(q_values, temperature: float, rng: np.random.Generator) -> int:
    """Draw an index with probability proportional to ``exp(q / temperature)``."""
    p = boltzmann_probs(q_values, temperature)
    idx = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
    return min(idx, p.shape[0] - 1)


@dataclass
class TemperatureSchedule:
    """Exponential decay from ``start`` to ``end`` over ``decay_steps``, then flat."""

    start: float = 1.0
    end: float = 0.1
    decay_steps: int = 1

    def __call__(self, step: int) -> float:
        frac = min(max(step, 0) / max(self.decay_steps, 1), 1.0)
        return self.start * (self.end / self.start) ** frac


def save_weights(net: MlpNetwork, path) -> None:
    header = {"input_dim": net.spec.input_dim, "hidden_dims": list(net.spec.hidden_dims),
              "output_dim": net.spec.output_dim, "dtype": net.spec.dtype, "count": int(net.params.size)}
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        # always stored as float64 so float32 nets round-trip exactly too
        fh.write(net.params.astype("<f8").tobytes())


def load_weights(path) -> MlpNetwork:
    raw = Path(path).read_bytes()
    if not raw.startswith(WEIGHTS_MAGIC):
        raise ValueError(f"{path}: not a weight snapshot")
    rest = raw[len(WEIGHTS_MAGIC):]
    line, _, body = rest.partition(b"\n")
    header = json.loads(line)
    spec = MlpSpec(header["input_dim"], header["output_dim"], tuple(header["hidden_dims"]), header["dtype"])
    net = MlpNetwork(spec)
    values = np.frombuffer(body, dtype="<f8")
    if values.size != header["count"] or values.size != net.params.size:
        raise ValueError(f"{path}: expected {net.params.size} values, found {values.size}")
    net.params[...] = values
    return net
