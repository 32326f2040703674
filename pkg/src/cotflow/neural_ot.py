"""Transport-map and potential training on the saddle objective.

A map network T pushes source samples toward the target while a scalar
potential psi scores target-ness; stochastic gradient ascent-descent
alternates potential ascent with a block of map descents. The closed-form
Gaussian transport map lives here too, as the recovery oracle.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import datasets
from .errors import DataError, NumericError
from .nn import AdamState, MlpParams, adam_step, init_adam, init_mlp, mlp_backward, mlp_forward
from .rng import Rng

logger = logging.getLogger(__name__)

COSTS = ("half_sq_l2",)


@dataclass(frozen=True)
class NeuralOTModel:
    """Trained transport map plus its adversarial potential."""

    map_params: MlpParams
    potential_params: MlpParams
    dim: int
    cost: str = "half_sq_l2"

    def __post_init__(self):
        if self.cost not in COSTS:
            raise DataError(f"unknown cost {self.cost!r}")
        m, p = self.map_params, self.potential_params
        if m.in_dim != self.dim or m.out_dim != self.dim:
            raise DataError(f"map must be R^{self.dim} -> R^{self.dim}, got {m.layer_dims}")
        if p.in_dim != self.dim or p.out_dim != 1:
            raise DataError(f"potential must be R^{self.dim} -> R, got {p.layer_dims}")


@dataclass(frozen=True)
class GaussianSpec:
    """Mean and SPD covariance for the Gaussian oracle."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DataError("mean must be a vector and cov a matching square matrix")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise DataError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0.0):
            raise DataError("covariance must be positive-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class TrainConfig:
    """Saddle-training settings; every field has an explicit config-file key."""

    n_outer: int = 4000
    k_map: int = 10
    batch_size: int = 256
    lr: float = 1e-4
    lr_final: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    map_hidden: tuple[int, ...] = (128, 128, 128)
    psi_hidden: tuple[int, ...] = (128, 128, 128)
    activation: str = "relu"
    log_every: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_outer < 0 or self.k_map < 1 or self.batch_size < 1 or self.log_every < 1:
            raise DataError("n_outer must be >= 0; k_map, batch_size, log_every positive")
        if self.lr < 0.0:
            raise DataError("lr must be nonnegative")
        if self.lr_final is not None and not (0.0 <= self.lr_final <= self.lr):
            raise DataError("lr_final must lie in [0, lr]")
        object.__setattr__(self, "map_hidden", tuple(int(h) for h in self.map_hidden))
        object.__setattr__(self, "psi_hidden", tuple(int(h) for h in self.psi_hidden))


def transport_cost(x, y):
    """Half squared Euclidean distance; batches give per-row costs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"shape mismatch: {x.shape} vs {y.shape}")
    d = x - y
    if d.ndim == 1:
        return 0.5 * float(d @ d)
    return 0.5 * np.sum(d * d, axis=-1)


def _check_batch(batch, dim: int, name: str) -> np.ndarray:
    b = np.asarray(batch, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] == 0 or b.shape[1] != dim:
        raise DataError(f"{name} must be a nonempty batch of {dim}-vectors, got shape {b.shape}")
    return b


def psi_ascent_step(
    model: NeuralOTModel,
    source_batch,
    target_batch,
    opt: AdamState,
) -> tuple[NeuralOTModel, AdamState, float]:
    """Ascend the potential on mean psi(y) - mean psi(T(x)).

    T(x) enters as a constant input; the map parameters are untouched.
    Returns the updated model, optimizer state, and the objective value.
    """
    x = _check_batch(source_batch, model.dim, "source_batch")
    y = _check_batch(target_batch, model.dim, "target_batch")
    tx = mlp_forward(model.map_params, x)
    psi_tx = mlp_forward(model.potential_params, tx)
    psi_y = mlp_forward(model.potential_params, y)
    objective = float(psi_y.mean() - psi_tx.mean())
    if not np.isfinite(objective):
        raise NumericError(f"non-finite potential objective {objective}")
    g_tx, _ = mlp_backward(
        model.potential_params, tx, np.full((x.shape[0], 1), -1.0 / x.shape[0])
    )
    g_y, _ = mlp_backward(
        model.potential_params, y, np.full((y.shape[0], 1), 1.0 / y.shape[0])
    )
    opt2, psi2 = adam_step(opt, model.potential_params, g_tx.added(g_y), direction="ascent")
    return replace(model, potential_params=psi2), opt2, objective


def map_descent_step(
    model: NeuralOTModel,
    source_batch,
    opt: AdamState,
) -> tuple[NeuralOTModel, AdamState, float]:
    """Descend the map on mean [c(x, T(x)) - psi(T(x))].

    The gradient chains through the potential's input gradient; potential
    parameters are untouched. Returns model, optimizer, objective value.
    """
    x = _check_batch(source_batch, model.dim, "source_batch")
    n = x.shape[0]
    tx = mlp_forward(model.map_params, x)
    psi_tx = mlp_forward(model.potential_params, tx)
    objective = float(np.mean(transport_cost(x, tx)) - psi_tx.mean())
    if not np.isfinite(objective):
        raise NumericError(f"non-finite map objective {objective}")
    _, psi_in_grad = mlp_backward(
        model.potential_params, tx, np.full((n, 1), 1.0 / n)
    )
    upstream = (tx - x) / n - psi_in_grad
    g_map, _ = mlp_backward(model.map_params, x, upstream)
    opt2, map2 = adam_step(opt, model.map_params, g_map, direction="descent")
    return replace(model, map_params=map2), opt2, objective


def init_neural_ot(dim: int, config: TrainConfig, rng: Rng) -> NeuralOTModel:
    map_params = init_mlp((dim, *config.map_hidden, dim), config.activation, rng.substream(0))
    psi_params = init_mlp((dim, *config.psi_hidden, 1), config.activation, rng.substream(1))
    return NeuralOTModel(map_params, psi_params, dim)


@dataclass(frozen=True)
class OTTrainResult:
    model: NeuralOTModel
    log: tuple[dict, ...]


def train_neural_ot(
    config: TrainConfig,
    source: "datasets.DatasetSpec",
    target: "datasets.DatasetSpec",
    rng: Rng,
) -> OTTrainResult:
    """Alternate k_map map descents with one potential ascent, n_outer times.

    Fresh mini-batches are streamed from both dataset specs each step;
    everything is deterministic given the rng. Aborts with NumericError on
    a non-finite objective.
    """
    if source.dim != target.dim:
        raise DataError(f"source dim {source.dim} != target dim {target.dim}")
    dim = source.dim
    model = init_neural_ot(dim, config, rng.substream(0))
    opt_map = init_adam(model.map_params, config.lr, config.beta1, config.beta2)
    opt_psi = init_adam(model.potential_params, config.lr, config.beta1, config.beta2)
    rng_x = rng.substream(1)
    rng_y = rng.substream(2)
    log: list[dict] = []
    map_obj = psi_obj = float("nan")
    denom = max(config.n_outer - 1, 1)
    for it in range(config.n_outer):
        if config.lr_final is not None:
            lr_t = config.lr + (config.lr_final - config.lr) * (it / denom)
            opt_map = dataclasses.replace(opt_map, lr=lr_t)
            opt_psi = dataclasses.replace(opt_psi, lr=lr_t)
        try:
            for _ in range(config.k_map):
                xb = datasets.sample_batch(source, config.batch_size, rng_x)
                model, opt_map, map_obj = map_descent_step(model, xb, opt_map)
            xb = datasets.sample_batch(source, config.batch_size, rng_x)
            yb = datasets.sample_batch(target, config.batch_size, rng_y)
            model, opt_psi, psi_obj = psi_ascent_step(model, xb, yb, opt_psi)
        except NumericError as err:
            raise NumericError(f"at outer iteration {it}: {err}") from err
        if (it + 1) % config.log_every == 0 or it + 1 == config.n_outer:
            log.append(
                {"iteration": it + 1, "map_objective": map_obj, "potential_objective": psi_obj}
            )
            logger.info(
                "neural-ot iter %d/%d map_obj %.5f psi_obj %.5f",
                it + 1, config.n_outer, map_obj, psi_obj,
            )
    return OTTrainResult(model, tuple(log))


def transport_map(model: NeuralOTModel, x) -> np.ndarray:
    """Evaluate the trained map on a point or batch."""
    return mlp_forward(model.map_params, x)


def _spd_sqrt(m: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(m)
    if np.any(w <= 0.0):
        raise DataError("matrix is not positive-definite")
    return (q * np.sqrt(w)) @ q.T


def _spd_inv_sqrt(m: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(m)
    if np.any(w <= 0.0):
        raise DataError("matrix is not positive-definite")
    return (q / np.sqrt(w)) @ q.T


def gaussian_ot_map(a: GaussianSpec, b: GaussianSpec) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form quadratic-cost transport between Gaussians.

    Returns (A, shift) with T*(x) = A x + shift,
    A = Sa^{-1/2} (Sa^{1/2} Sb Sa^{1/2})^{1/2} Sa^{-1/2}.
    """
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sa_h = _spd_sqrt(a.cov)
    sa_ih = _spd_inv_sqrt(a.cov)
    inner = _spd_sqrt(sa_h @ b.cov @ sa_h)
    big_a = sa_ih @ inner @ sa_ih
    big_a = 0.5 * (big_a + big_a.T)
    shift = b.mean - big_a @ a.mean
    return big_a, shift
