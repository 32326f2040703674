"""Minimal dense-network engine: MLPs with analytic reverse-mode gradients.

The whole project runs on one closed architecture family (affine layers,
a single hidden activation, linear output) in 64-bit floats, so gradients
can be written by hand and checked against finite differences. All
operations here are pure: parameters and optimizer states are immutable
values, and updates return fresh objects.

Conventions: a point is a 1-D float64 array; a batch is a row-major 2-D
array with one sample per row. Weight matrices are stored (out, in).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .rng import Rng

ACTIVATIONS = ("relu", "tanh", "identity")


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out is a:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases of one feed-forward network.

    layer_dims runs input -> hidden... -> output; weights[i] has shape
    (layer_dims[i+1], layer_dims[i]) and biases[i] has length
    layer_dims[i+1]. The activation applies to hidden layers only; the
    output layer is always linear.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise DataError("layer_dims needs at least an input and an output dim")
        if any(d <= 0 for d in dims):
            raise DataError(f"layer_dims must be positive, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DataError("need one weight matrix and bias vector per layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = _freeze(np.asarray(w))
            b = _freeze(np.asarray(b))
            if w.shape != (dims[i + 1], dims[i]):
                raise DataError(
                    f"weights[{i}] has shape {w.shape}, expected {(dims[i + 1], dims[i])}"
                )
            if b.shape != (dims[i + 1],):
                raise DataError(f"biases[{i}] has shape {b.shape}, expected ({dims[i + 1]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise DataError(f"non-finite entries in layer {i}")
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class MlpGrads:
    """Per-layer gradient blocks, shaped exactly like the MlpParams they grade."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def scaled(self, c: float) -> "MlpGrads":
        return MlpGrads(
            tuple(c * w for w in self.weights),
            tuple(c * b for b in self.biases),
        )

    def added(self, other: "MlpGrads") -> "MlpGrads":
        return MlpGrads(
            tuple(a + b for a, b in zip(self.weights, other.weights)),
            tuple(a + b for a, b in zip(self.biases, other.biases)),
        )


def init_mlp(layer_dims, activation: str, rng: Rng) -> MlpParams:
    """Glorot-uniform weights, zero biases, reproducible from the rng."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise DataError(f"invalid layer_dims {dims}")
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MlpParams(dims, tuple(ws), tuple(bs), activation)


def _check_input(params: MlpParams, x: np.ndarray, name: str = "input") -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise DataError(
            f"{name} has shape {np.asarray(x).shape}, expected vectors of length {params.in_dim}"
        )
    return x, single


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _forward_trace(params: MlpParams, x: np.ndarray):
    """Returns (output, pre-activations, post-activations incl. input)."""
    acts = [x]
    pres = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pres.append(z)
        h = z if i == last else _act(z, params.activation)
        acts.append(h)
    return h, pres, acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network on a point or a batch of points."""
    xb, single = _check_input(params, x)
    out, _, _ = _forward_trace(params, xb)
    return out[0] if single else out


def mlp_backward(params: MlpParams, x, upstream) -> tuple[MlpGrads, np.ndarray]:
    """Exact gradients of <upstream, mlp_forward(params, x)>.

    Returns per-layer parameter gradients and the gradient with respect
    to the input (needed to chain networks). For batches the scalar being
    differentiated is the sum over rows of the per-row inner products.
    """
    xb, single = _check_input(params, x)
    ub = np.asarray(upstream, dtype=np.float64)
    if single:
        ub = ub[None, :]
    if ub.shape != (xb.shape[0], params.out_dim):
        raise DataError(
            f"upstream gradient has shape {np.asarray(upstream).shape}, "
            f"expected output shape ({xb.shape[0]}, {params.out_dim})"
        )
    _, pres, acts = _forward_trace(params, xb)
    n_layers = len(params.weights)
    dws: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = ub
    for i in range(n_layers - 1, -1, -1):
        dws[i] = delta.T @ acts[i]
        dbs[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * _act_grad(pres[i - 1], acts[i], params.activation)
    dx = delta[0] if single else delta
    return MlpGrads(tuple(dws), tuple(dbs)), dx


@dataclass(frozen=True)
class AdamState:
    """Adaptive-moment accumulator for one MlpParams instance."""

    first_moment: MlpGrads
    second_moment: MlpGrads
    step_count: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    def __post_init__(self):
        if not (self.lr >= 0.0):
            raise DataError(f"lr must be >= 0, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise DataError("betas must lie in [0, 1)")
        if not (self.eps > 0.0):
            raise DataError("eps must be positive")
        if self.step_count < 0:
            raise DataError("step_count must be nonnegative")


def init_adam(
    params: MlpParams,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    zeros = MlpGrads(
        tuple(np.zeros_like(w) for w in params.weights),
        tuple(np.zeros_like(b) for b in params.biases),
    )
    return AdamState(zeros, zeros, 0, float(lr), float(beta1), float(beta2), float(eps))


def adam_step(
    state: AdamState,
    params: MlpParams,
    grads: MlpGrads,
    direction: str = "descent",
) -> tuple[AdamState, MlpParams]:
    """One bias-corrected adaptive-moment update; `ascent` negates the step."""
    if direction not in ("descent", "ascent"):
        raise DataError(f"direction must be descent or ascent, got {direction!r}")
    sign = -1.0 if direction == "descent" else 1.0
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    def update(p, g, m, v, label):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise DataError(f"gradient block {label} has shape {g.shape}, expected {p.shape}")
        m2 = state.beta1 * m + (1.0 - state.beta1) * g
        v2 = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p2 = p + sign * state.lr * (m2 / bc1) / (np.sqrt(v2 / bc2) + state.eps)
        return p2, m2, v2

    new_w, new_b, mw, vw, mb, vb = [], [], [], [], [], []
    for i in range(len(params.weights)):
        w2, m2, v2 = update(
            params.weights[i], grads.weights[i],
            state.first_moment.weights[i], state.second_moment.weights[i], f"weights[{i}]",
        )
        new_w.append(w2), mw.append(m2), vw.append(v2)
        b2, m2, v2 = update(
            params.biases[i], grads.biases[i],
            state.first_moment.biases[i], state.second_moment.biases[i], f"biases[{i}]",
        )
        new_b.append(b2), mb.append(m2), vb.append(v2)

    new_state = AdamState(
        MlpGrads(tuple(mw), tuple(mb)),
        MlpGrads(tuple(vw), tuple(vb)),
        t,
        state.lr,
        state.beta1,
        state.beta2,
        state.eps,
    )
    new_params = MlpParams(params.layer_dims, tuple(new_w), tuple(new_b), params.activation)
    return new_state, new_params


def time_embed(t: float, n_freq: int) -> np.ndarray:
    """[t, sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^(f-1) pi t), cos(...)]."""
    emb = time_features(np.asarray([t], dtype=np.float64), n_freq)
    return emb[0]


def time_features(ts: np.ndarray, n_freq: int) -> np.ndarray:
    """Row-wise time embedding for a vector of times in [0, 1]."""
    if n_freq < 1:
        raise DataError(f"n_freq must be positive, got {n_freq}")
    ts = np.asarray(ts, dtype=np.float64)
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DataError("time values must lie in [0, 1]")
    cols = [ts]
    for k in range(n_freq):
        ang = (2.0**k) * np.pi * ts
        cols.append(np.sin(ang))
        cols.append(np.cos(ang))
    return np.stack(cols, axis=-1)
