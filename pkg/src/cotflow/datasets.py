"""Procedural toy datasets: 2-D translation tasks and 16x16 glyph vectors.

Every family is an infinite sampler driven by an explicit Rng, so training
can stream fresh batches while gen_dataset freezes a reproducible batch
from the spec's own seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .rng import Rng

FAMILIES = (
    "gaussian",
    "eight_gaussians",
    "moons",
    "checkerboard",
    "spiral",
    "glyph_outline",
    "glyph_filled",
)

GLYPH_SIDE = 16
GLYPH_DIM = GLYPH_SIDE * GLYPH_SIDE

_DEFAULTS: dict[str, dict] = {
    "gaussian": {"mean": (0.0, 0.0), "cov": ((1.0, 0.0), (0.0, 1.0))},
    "eight_gaussians": {"radius": 4.0, "std": 0.2},
    "moons": {"noise": 0.05, "scale": 1.0},
    "checkerboard": {"extent": 2.0},
    "spiral": {"noise": 0.03, "turns": 1.5},
    "glyph_outline": {},
    "glyph_filled": {},
}


@dataclass(frozen=True)
class DatasetSpec:
    """Family name, draw count, seed and per-family shape parameters."""

    name: str
    n: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise DataError(f"unknown dataset family {self.name!r}")
        if int(self.n) != self.n or self.n <= 0:
            raise DataError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        merged = dict(_DEFAULTS[self.name])
        for key, val in dict(self.params).items():
            if key not in merged:
                raise DataError(f"unknown parameter {key!r} for family {self.name!r}")
            merged[key] = val
        if self.name == "gaussian":
            mean = np.asarray(merged["mean"], dtype=np.float64)
            cov = np.asarray(merged["cov"], dtype=np.float64)
            if cov.ndim == 0:
                cov = float(cov) * np.eye(mean.size)
            elif cov.ndim == 1:
                cov = np.diag(cov)
            if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
                raise DataError("gaussian needs a mean vector and matching covariance")
            if not np.allclose(cov, cov.T, atol=1e-12) or np.any(
                np.linalg.eigvalsh(cov) <= 0.0
            ):
                raise DataError("gaussian covariance must be symmetric positive-definite")
            merged["mean"] = tuple(float(v) for v in mean)
            merged["cov"] = tuple(tuple(float(v) for v in row) for row in cov)
        object.__setattr__(self, "params", merged)

    @property
    def dim(self) -> int:
        if self.name == "gaussian":
            return len(self.params["mean"])
        if self.name.startswith("glyph"):
            return GLYPH_DIM
        return 2

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        extra = set(d) - {"name", "n", "seed", "params"}
        if extra:
            raise DataError(f"unknown dataset spec keys {sorted(extra)}")
        for key in ("name", "n", "seed"):
            if key not in d:
                raise DataError(f"dataset spec is missing {key!r}")
        return cls(d["name"], d["n"], d["seed"], d.get("params", {}))


def _sample_gaussian(params: dict, n: int, rng: Rng) -> np.ndarray:
    mean = np.asarray(params["mean"])
    cov = np.asarray(params["cov"])
    chol = np.linalg.cholesky(cov)
    return mean + rng.normal((n, mean.size)) @ chol.T


def _sample_eight_gaussians(params: dict, n: int, rng: Rng) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(8) / 8.0
    centers = params["radius"] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    which = rng.integers(0, 8, size=n)
    return centers[which] + params["std"] * rng.normal((n, 2))


def _sample_moons(params: dict, n: int, rng: Rng) -> np.ndarray:
    upper = rng.integers(0, 2, size=n).astype(bool)
    theta = rng.uniform(0.0, np.pi, size=n)
    x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
    y = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
    pts = np.stack([x - 0.5, y - 0.25], axis=1)
    pts = params["scale"] * pts + params["noise"] * rng.normal((n, 2))
    return pts


def _sample_checkerboard(params: dict, n: int, rng: Rng) -> np.ndarray:
    # 4x4 grid of unit cells on [-extent, extent]^2, dark squares only.
    extent = params["extent"]
    cell = extent / 2.0
    cells = [(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0]
    idx = rng.integers(0, len(cells), size=n)
    base = np.asarray(cells, dtype=np.float64)[idx] * cell - extent
    return base + rng.uniform(0.0, cell, size=(n, 2))


def _sample_spiral(params: dict, n: int, rng: Rng) -> np.ndarray:
    max_angle = 2.0 * np.pi * params["turns"]
    theta = max_angle * np.sqrt(rng.uniform(0.05, 1.0, size=n))
    r = 1.8 * theta / max_angle
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return pts + params["noise"] * rng.normal((n, 2))


def _glyph_shapes(n: int, rng: Rng):
    yy, xx = np.meshgrid(np.arange(GLYPH_SIDE, dtype=np.float64),
                         np.arange(GLYPH_SIDE, dtype=np.float64), indexing="ij")
    cy = rng.uniform(6.5, 8.5, size=n)
    cx = rng.uniform(6.5, 8.5, size=n)
    ry = rng.uniform(3.0, 5.5, size=n)
    rx = rng.uniform(3.0, 5.5, size=n)
    rho = np.sqrt(
        ((yy[None] - cy[:, None, None]) / ry[:, None, None]) ** 2
        + ((xx[None] - cx[:, None, None]) / rx[:, None, None]) ** 2
    )
    return rho, yy, xx


def _sample_glyph_outline(params: dict, n: int, rng: Rng) -> np.ndarray:
    rho, _, _ = _glyph_shapes(n, rng)
    width = rng.uniform(0.06, 0.14, size=n)[:, None, None]
    img = np.exp(-(((rho - 1.0) / width) ** 2))
    return img.reshape(n, GLYPH_DIM)


def _sample_glyph_filled(params: dict, n: int, rng: Rng) -> np.ndarray:
    rho, yy, xx = _glyph_shapes(n, rng)
    base = np.clip(1.5 * (1.0 - rho), 0.0, 1.0)
    freq = rng.uniform(2.0, 4.0, size=n)[:, None, None]
    alpha = rng.uniform(0.0, np.pi, size=n)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n)[:, None, None]
    axis = np.cos(alpha)[:, None, None] * xx[None] + np.sin(alpha)[:, None, None] * yy[None]
    stripes = 0.75 + 0.25 * np.sin(2.0 * np.pi * freq * axis / GLYPH_SIDE + phase)
    img = base * stripes
    return img.reshape(n, GLYPH_DIM)


_SAMPLERS = {
    "gaussian": _sample_gaussian,
    "eight_gaussians": _sample_eight_gaussians,
    "moons": _sample_moons,
    "checkerboard": _sample_checkerboard,
    "spiral": _sample_spiral,
    "glyph_outline": _sample_glyph_outline,
    "glyph_filled": _sample_glyph_filled,
}


def sample_batch(spec: DatasetSpec, n: int, rng: Rng) -> np.ndarray:
    """Draw n fresh samples from the family using the caller's rng."""
    if n <= 0:
        raise DataError(f"n must be positive, got {n}")
    return _SAMPLERS[spec.name](spec.params, n, rng)


def gen_dataset(spec: DatasetSpec) -> np.ndarray:
    """The spec's own reproducible batch: n samples from seed."""
    return sample_batch(spec, spec.n, Rng(spec.seed))
