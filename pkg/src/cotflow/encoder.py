"""Origin encoder: boundary-anchored network trained on contrastive pairs.

The encoder E(x, t) = t*x + (1-t)*F([x, time-embedding(t)]) is exactly the
identity at t = 1, so trajectory points get pulled toward the transported
end. Training minimizes the squared distance between the encodings of the
two members of a pair, with gradients flowing only through the earlier-time
(student) branch; the later-time branch acts as a frozen teacher sharing
the same weights.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from . import datasets
from .bridge import TimeGrid, CotPair, interpolate_with_noise, sample_timestep_pairs
from .errors import DataError, NumericError
from .nn import (
    MlpGrads,
    MlpParams,
    adam_step,
    init_adam,
    init_mlp,
    mlp_backward,
    mlp_forward,
    time_features,
)
from .neural_ot import NeuralOTModel
from .rng import Rng

logger = logging.getLogger(__name__)

ORIENTATIONS = ("target_at_one",)
PAIR_MODES = ("cot_pairs", "adjacent_pairs")
OT_DIRECTIONS = ("forward", "reverse")
DISTANCES = ("squared_l2",)


@dataclass(frozen=True)
class CotEncoder:
    """Encoder body plus the fixed boundary schedule c_skip(t)=t, c_out(t)=1-t."""

    body: MlpParams
    n_freq: int
    grid: TimeGrid
    sigma: float
    orientation: str = "target_at_one"

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise DataError(f"unknown orientation {self.orientation!r}")
        if self.sigma < 0.0:
            raise DataError(f"sigma must be nonnegative, got {self.sigma}")
        if self.n_freq < 1:
            raise DataError(f"n_freq must be positive, got {self.n_freq}")
        d = self.body.out_dim
        expected = d + 2 * self.n_freq + 1
        if self.body.in_dim != expected:
            raise DataError(
                f"body input dim {self.body.in_dim} != data dim {d} + "
                f"time embedding {2 * self.n_freq + 1}"
            )

    @property
    def dim(self) -> int:
        return self.body.out_dim


@dataclass(frozen=True)
class CotTrainConfig:
    """Contrastive-training settings; every field has an explicit config key."""

    lr: float = 1e-4
    lr_final: float | None = None
    batch_size: int = 256
    n_iters: int = 60000
    sigma: float = 1.0
    n_times: int = 40
    schedule: str = "uniform"
    mode_s: float = 1.29
    distance: str = "squared_l2"
    pair_mode: str = "cot_pairs"
    ot_direction: str = "forward"
    seed: int = 0
    body_hidden: tuple[int, ...] = (128, 128, 128)
    activation: str = "relu"
    n_freq: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    log_every: int = 500

    def __post_init__(self):
        if self.distance not in DISTANCES:
            raise DataError(f"unknown distance {self.distance!r}")
        if self.pair_mode not in PAIR_MODES:
            raise DataError(f"unknown pair_mode {self.pair_mode!r}")
        if self.ot_direction not in OT_DIRECTIONS:
            raise DataError(f"unknown ot_direction {self.ot_direction!r}")
        if self.n_iters < 0 or self.batch_size < 1 or self.log_every < 1:
            raise DataError("n_iters must be >= 0; batch_size, log_every positive")
        if self.lr < 0.0 or self.sigma < 0.0:
            raise DataError("lr and sigma must be nonnegative")
        if self.lr_final is not None and not (0.0 <= self.lr_final <= self.lr):
            raise DataError("lr_final must lie in [0, lr]")
        if self.n_times < 2:
            raise DataError(f"n_times must be >= 2, got {self.n_times}")
        object.__setattr__(self, "body_hidden", tuple(int(h) for h in self.body_hidden))

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.n_times, self.schedule, self.mode_s)


def init_cot_encoder(dim: int, config: CotTrainConfig, rng: Rng) -> CotEncoder:
    in_dim = dim + 2 * config.n_freq + 1
    body = init_mlp((in_dim, *config.body_hidden, dim), config.activation, rng)
    return CotEncoder(body, config.n_freq, config.time_grid(), config.sigma)


def _body_input(enc: CotEncoder, x: np.ndarray, ts: np.ndarray) -> np.ndarray:
    emb = time_features(ts, enc.n_freq)
    return np.concatenate([x, emb], axis=1)


def _eval_batch(enc: CotEncoder, x: np.ndarray, ts: np.ndarray) -> np.ndarray:
    body_out = mlp_forward(enc.body, _body_input(enc, x, ts))
    tcol = ts[:, None]
    return tcol * x + (1.0 - tcol) * body_out


def encoder_eval(enc: CotEncoder, x, t) -> np.ndarray:
    """E(x, t) = t*x + (1-t)*body([x, embed(t)]); exactly x at t = 1."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != enc.dim:
        raise DataError(f"input has shape {x.shape}, expected vectors of length {enc.dim}")
    ts = np.asarray(t, dtype=np.float64)
    if ts.ndim == 0:
        ts = np.full(xb.shape[0], float(ts))
    if ts.shape != (xb.shape[0],):
        raise DataError("t must be a scalar or one value per row")
    out = _eval_batch(enc, xb, ts)
    return out[0] if single else out


def _loss_and_grads(
    enc: CotEncoder,
    x1: np.ndarray,
    t1: np.ndarray,
    x2: np.ndarray,
    t2: np.ndarray,
) -> tuple[float, MlpGrads]:
    """Mean squared pair distance and its student-branch gradients.

    The t2 branch is evaluated first and enters as a constant target, which
    is what the shared-weight stop-gradient update reduces to.
    """
    teacher = _eval_batch(enc, x2, t2)
    inp1 = _body_input(enc, x1, t1)
    student = mlp_forward(enc.body, inp1)
    tcol = t1[:, None]
    e1 = tcol * x1 + (1.0 - tcol) * student
    diff = e1 - teacher
    n = x1.shape[0]
    loss = float(np.sum(diff * diff)) / n
    upstream = (2.0 / n) * diff * (1.0 - tcol)
    grads, _ = mlp_backward(enc.body, inp1, upstream)
    return loss, grads


def cot_loss(enc: CotEncoder, pair: CotPair) -> tuple[float, MlpGrads]:
    """Squared distance between the two encodings of one pair.

    Gradients flow only through the earlier-time branch; the later-time
    branch is a frozen target.
    """
    if pair.first.value.shape != (enc.dim,):
        raise DataError(
            f"pair dimension {pair.first.value.shape} does not match encoder dim {enc.dim}"
        )
    return _loss_and_grads(
        enc,
        pair.first.value[None, :],
        np.asarray([pair.first.t]),
        pair.second.value[None, :],
        np.asarray([pair.second.t]),
    )


@dataclass(frozen=True)
class CotTrainResult:
    encoder: CotEncoder
    loss_trace: np.ndarray
    log: tuple[dict, ...]


def _pair_indices(config: CotTrainConfig, grid: TimeGrid, n: int, rng: Rng):
    if config.pair_mode == "adjacent_pairs":
        n1 = rng.integers(0, grid.n_times - 1, size=n)
        return n1, n1 + 1
    return sample_timestep_pairs(grid, n, rng)


def train_cot(
    config: CotTrainConfig,
    data: "datasets.DatasetSpec",
    ot_model: NeuralOTModel,
    rng: Rng,
) -> CotTrainResult:
    """Contrastive training loop over freshly sampled trajectories.

    Under ot_direction=forward, `data` is the source distribution and
    trajectories run from the sample to its mapped image. Under reverse,
    `data` is the *target* distribution, the map must have been trained
    target -> source, and trajectories run from the back-mapped point to
    the sample. Gradient descent on the pair loss; returns the encoder,
    the per-iteration loss trace, and periodic log records.
    """
    if data.dim != ot_model.dim:
        raise DataError(f"data dim {data.dim} != transport model dim {ot_model.dim}")
    grid = config.time_grid()
    enc = init_cot_encoder(data.dim, config, rng.substream(0))
    opt = init_adam(enc.body, config.lr, config.beta1, config.beta2)
    rng_data = rng.substream(1)
    rng_pairs = rng.substream(2)
    rng_noise = rng.substream(3)
    values = grid.values
    trace = np.zeros(config.n_iters)
    log: list[dict] = []
    denom = max(config.n_iters - 1, 1)
    for it in range(config.n_iters):
        if config.lr_final is not None:
            lr_t = config.lr + (config.lr_final - config.lr) * (it / denom)
            opt = dataclasses.replace(opt, lr=lr_t)
        w = datasets.sample_batch(data, config.batch_size, rng_data)
        mapped = mlp_forward(ot_model.map_params, w)
        x0, x1 = (w, mapped) if config.ot_direction == "forward" else (mapped, w)
        i1, i2 = _pair_indices(config, grid, config.batch_size, rng_pairs)
        t1, t2 = values[i1], values[i2]
        z1 = rng_noise.normal(x0.shape)
        z2 = rng_noise.normal(x0.shape)
        xt1 = interpolate_with_noise(x0, x1, t1[:, None], config.sigma, z1)
        xt2 = interpolate_with_noise(x0, x1, t2[:, None], config.sigma, z2)
        loss, grads = _loss_and_grads(enc, xt1, t1, xt2, t2)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss {loss} at iteration {it}")
        opt, body = adam_step(opt, enc.body, grads, direction="descent")
        enc = CotEncoder(body, enc.n_freq, enc.grid, enc.sigma, enc.orientation)
        trace[it] = loss
        if (it + 1) % config.log_every == 0 or it + 1 == config.n_iters:
            log.append({"iteration": it + 1, "loss": loss})
            logger.info("cot iter %d/%d loss %.6f", it + 1, config.n_iters, loss)
    return CotTrainResult(enc, trace, tuple(log))
