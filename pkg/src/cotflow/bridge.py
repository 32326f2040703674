"""Augmentation trajectories between a point and its transported image.

A source point x and its mapped image Tx span a noisy interpolation area:
points on it are positive pairs for contrastive training, and its
statistics are pinned down by Brownian-bridge marginals, which double as
the oracle for the dynamic extension of entropic plans.

Two noise laws ship side by side. The training default scales a standard
normal draw by t(1-t)*sigma^2; the bridge law uses the pinned-process
variance t(1-t)*sigma. They coincide at sigma = 1 and the discrepancy is
deliberately measurable rather than silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .oracles import CouplingPlan
from .rng import Rng

NOISE_LAWS = ("paper_eq12", "bridge")
SCHEDULES = ("uniform", "mode")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of [0, 1] into n_times points t_n = n/(n_times-1)."""

    n_times: int
    schedule: str = "uniform"
    mode_s: float = 1.29

    def __post_init__(self):
        if int(self.n_times) != self.n_times or self.n_times < 2:
            raise DataError(f"n_times must be an integer >= 2, got {self.n_times}")
        object.__setattr__(self, "n_times", int(self.n_times))
        if self.schedule not in SCHEDULES:
            raise DataError(f"unknown time schedule {self.schedule!r}")

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.n_times) / (self.n_times - 1)


@dataclass(frozen=True)
class AugmentationPoint:
    """One noisy interpolant x_t between a source point and its image."""

    value: np.ndarray
    t: float
    source: np.ndarray
    mapped: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.value, dtype=np.float64)
        if not np.isfinite(v).all():
            raise DataError("augmentation point has non-finite entries")
        if not (0.0 <= self.t <= 1.0):
            raise DataError(f"t must lie in [0, 1], got {self.t}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "source", np.asarray(self.source, dtype=np.float64))
        object.__setattr__(self, "mapped", np.asarray(self.mapped, dtype=np.float64))


@dataclass(frozen=True)
class CotPair:
    """Two interpolants on the same trajectory, ordered first.t < second.t."""

    first: AugmentationPoint
    second: AugmentationPoint

    def __post_init__(self):
        if not (self.first.t < self.second.t):
            raise DataError(
                f"pair times must satisfy t1 < t2, got {self.first.t} >= {self.second.t}"
            )
        if self.first.source.shape != self.second.source.shape or not (
            np.array_equal(self.first.source, self.second.source)
            and np.array_equal(self.first.mapped, self.second.mapped)
        ):
            raise DataError("pair members must share the same trajectory endpoints")


def _check_endpoints(x, tx) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    tx = np.asarray(tx, dtype=np.float64)
    if x.shape != tx.shape:
        raise DataError(f"endpoint shape mismatch: {x.shape} vs {tx.shape}")
    return x, tx


def noise_scale(t, sigma: float, noise_law: str):
    """Standard deviation multiplying a unit normal draw at time t."""
    if noise_law == "paper_eq12":
        return t * (1.0 - t) * sigma**2
    if noise_law == "bridge":
        return np.sqrt(t * (1.0 - t) * sigma)
    raise DataError(f"unknown noise law {noise_law!r}")


def interpolate_with_noise(x, tx, t, sigma: float, z, noise_law: str = "paper_eq12"):
    """t*Tx + (1-t)*x plus the law's noise scale times z; exact at t in {0, 1}.

    Deterministic core shared by augment_point and the batched samplers;
    x, tx, z broadcast, and t may be a scalar or a per-row column.
    """
    x, tx = _check_endpoints(x, tx)
    ts = np.asarray(t, dtype=np.float64)
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise DataError("t must lie in [0, 1]")
    if sigma < 0.0:
        raise DataError(f"sigma must be nonnegative, got {sigma}")
    return ts * tx + (1.0 - ts) * x + noise_scale(ts, sigma, noise_law) * np.asarray(z)


def augment_point(
    x,
    tx,
    t: float,
    sigma: float,
    rng: Rng,
    noise_law: str = "paper_eq12",
) -> AugmentationPoint:
    """Sample one interpolant of the augmentation trajectory at time t."""
    x, tx = _check_endpoints(x, tx)
    z = rng.normal(x.shape)
    value = interpolate_with_noise(x, tx, t, sigma, z, noise_law)
    return AugmentationPoint(value, float(t), x, tx)


def mode_time_density(u: float, s: float):
    """Map a uniform draw u to a time favoring the middle of [0, 1] for s > 0.

    t = 1 - u - s*(cos^2(pi u / 2) - 1 + u), clamped to [0, 1]; s = 0 is the
    uniform law.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise DataError("u must lie in [0, 1]")
    t = 1.0 - u - s * (np.cos(np.pi * u / 2.0) ** 2 - 1.0 + u)
    return np.clip(t, 0.0, 1.0)


def _mode_indices(grid: TimeGrid, n: int, rng: Rng) -> np.ndarray:
    u = rng.uniform(0.0, 1.0, size=n)
    t = mode_time_density(u, grid.mode_s)
    return np.rint(t * (grid.n_times - 1)).astype(np.int64)


def sample_timestep_pairs(grid: TimeGrid, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized draw of n ordered index pairs (n1 < n2) from the grid.

    The uniform schedule is exactly uniform over the ordered pairs; the
    mode schedule draws each index from the mode density and redraws
    collisions before sorting.
    """
    m = grid.n_times
    if grid.schedule == "uniform":
        i = rng.integers(0, m, size=n)
        j = rng.integers(0, m - 1, size=n)
        j = j + (j >= i)
    else:
        i = _mode_indices(grid, n, rng)
        j = _mode_indices(grid, n, rng)
        clash = i == j
        while np.any(clash):
            j[clash] = _mode_indices(grid, int(clash.sum()), rng)
            clash = i == j
    n1 = np.minimum(i, j)
    n2 = np.maximum(i, j)
    return n1, n2


def sample_timestep_pair(grid: TimeGrid, rng: Rng) -> tuple[float, float]:
    """One ordered pair of distinct grid times t1 < t2."""
    n1, n2 = sample_timestep_pairs(grid, 1, rng)
    values = grid.values
    return float(values[n1[0]]), float(values[n2[0]])


def sample_cot_pair(
    x,
    tx,
    grid: TimeGrid,
    sigma: float,
    rng: Rng,
    noise_law: str = "paper_eq12",
) -> CotPair:
    """Draw (t1, t2) from the grid and materialize both interpolants.

    Each member gets its own independent noise draw.
    """
    x, tx = _check_endpoints(x, tx)
    t1, t2 = sample_timestep_pair(grid, rng)
    first = augment_point(x, tx, t1, sigma, rng, noise_law)
    second = augment_point(x, tx, t2, sigma, rng, noise_law)
    return CotPair(first, second)


def bridge_marginal(x0, xt, t: float, sigma: float, horizon: float = 1.0):
    """Closed-form pinned-process marginal: mean t*xT + (horizon-t)*x0,
    per-coordinate variance t*(horizon-t)*sigma."""
    x0, xt = _check_endpoints(x0, xt)
    if sigma < 0.0:
        raise DataError(f"sigma must be nonnegative, got {sigma}")
    if horizon <= 0.0:
        raise DataError(f"horizon must be positive, got {horizon}")
    if not (0.0 <= t <= horizon):
        raise DataError(f"t must lie in [0, {horizon}], got {t}")
    mean = t * xt + (horizon - t) * x0
    variance = t * (horizon - t) * sigma
    return mean, variance


def sample_bridge_marginal(x0, xt, t: float, sigma: float, n: int, rng: Rng) -> np.ndarray:
    """n draws from the unit-horizon bridge marginal between x0 and xT."""
    x0, xt = _check_endpoints(x0, xt)
    if n <= 0:
        raise DataError("n must be positive")
    mean, variance = bridge_marginal(x0, xt, t, sigma, horizon=1.0)
    z = rng.normal((n,) + np.atleast_1d(mean).shape)
    return np.atleast_1d(mean)[None, :] + np.sqrt(variance) * z


def sample_bridge_mixture(
    plan: CouplingPlan,
    atoms_x,
    atoms_y,
    t: float,
    sigma: float,
    n: int,
    rng: Rng,
) -> np.ndarray:
    """Time-t marginal of the plan's dynamic extension.

    Draws endpoint pairs from the discrete coupling, then the bridge
    marginal between them: the sampling route for the entropic plan's
    pinned-process extension.
    """
    ax = np.atleast_2d(np.asarray(atoms_x, dtype=np.float64).T).T
    ay = np.atleast_2d(np.asarray(atoms_y, dtype=np.float64).T).T
    if ax.ndim != 2 or ay.ndim != 2 or ax.shape[1] != ay.shape[1]:
        raise DataError("atom batches must share one dimension")
    if plan.shape != (ax.shape[0], ay.shape[0]):
        raise DataError(
            f"plan shape {plan.shape} does not match atom counts {(ax.shape[0], ay.shape[0])}"
        )
    if not (0.0 <= t <= 1.0):
        raise DataError(f"t must lie in [0, 1], got {t}")
    if n <= 0:
        raise DataError("n must be positive")
    probs = plan.matrix.reshape(-1)
    probs = probs / probs.sum()
    flat = rng.choice(probs.size, size=n, p=probs)
    i, j = np.divmod(flat, ay.shape[0])
    mean = t * ay[j] + (1.0 - t) * ax[i]
    variance = t * (1.0 - t) * sigma
    return mean + np.sqrt(variance) * rng.normal(mean.shape)
