"""Inference on a trained encoder: samplers and zero-shot editors.

One-step sampling reads the encoder at the source end of the trajectory;
multi-step sampling re-mixes the current target estimate with the source
input plus bridge noise before re-encoding. The ancestral variant instead
re-mixes the previous augmented state along a decreasing time ladder and
exists as the ablation baseline. Editors feed composed or fused inputs
through the encoder at a chosen time, trading faithfulness (t near 1)
against regeneration (t near 0).

All operations are bitwise deterministic given (encoder, inputs, seed).
Batch calls draw each row's noise from the row-indexed substream, so a
batch equals the per-point calls made with those substreams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bridge import noise_scale
from .encoder import CotEncoder, encoder_eval
from .errors import DataError
from .rng import Rng

SCHEDULE_KINDS = ("self_augmentation", "ancestral")


@dataclass(frozen=True)
class SampleSchedule:
    """Ordered evaluation times strictly inside (0, 1); need not increase."""

    steps: tuple[float, ...]
    kind: str = "self_augmentation"

    def __post_init__(self):
        steps = tuple(float(t) for t in self.steps)
        if len(steps) == 0:
            raise DataError("schedule must contain at least one step")
        if any(not (0.0 < t < 1.0) for t in steps):
            raise DataError("schedule steps must lie strictly inside (0, 1)")
        if self.kind not in SCHEDULE_KINDS:
            raise DataError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def increasing(cls, n_steps: int) -> "SampleSchedule":
        """t_k = k/(n_steps+1), the default self-augmentation ladder."""
        if n_steps < 1:
            raise DataError("n_steps must be positive")
        return cls(tuple((k + 1) / (n_steps + 1) for k in range(n_steps)), "self_augmentation")

    @classmethod
    def decreasing(cls, n_steps: int) -> "SampleSchedule":
        """t_k = (n_steps-k)/(n_steps+1), the ancestral ladder below t_0 = 1."""
        if n_steps < 1:
            raise DataError("n_steps must be positive")
        return cls(tuple((n_steps - k) / (n_steps + 1) for k in range(n_steps)), "ancestral")


@dataclass(frozen=True)
class MaskedGuidance:
    """Target-side base vector with a boolean mask selecting patched entries."""

    base: np.ndarray
    mask: np.ndarray
    patch: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        patch = np.asarray(self.patch, dtype=np.float64)
        if base.ndim != 1 or mask.shape != base.shape or patch.shape != base.shape:
            raise DataError("base, mask, and patch must be vectors of one length")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "patch", patch)


def _as_rows(x, dim: int, name: str = "input") -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != dim:
        raise DataError(f"{name} has shape {x.shape}, expected vectors of length {dim}")
    return xb, single


def _noise_block(n_rows: int, n_steps: int, dim: int, rng: Rng, single: bool) -> np.ndarray:
    """(rows, steps, dim) standard normals; rows use indexed substreams."""
    if single:
        return rng.normal((1, n_steps, dim))
    return np.stack([rng.substream(i).normal((n_steps, dim)) for i in range(n_rows)])


def sample_one_step(enc: CotEncoder, x) -> np.ndarray:
    """Full translation in one encoder call at the source end t = 0."""
    return encoder_eval(enc, x, 0.0)


def sample_multi_step(enc: CotEncoder, x, schedule: SampleSchedule, rng: Rng) -> np.ndarray:
    """Self-augmentation refinement of the one-step estimate.

    Each step rebuilds a trajectory point from the current estimate (at
    weight t_k, the transported end's weight) and the original input, adds
    the bridge noise, and re-encodes at t_k.
    """
    if schedule.kind != "self_augmentation":
        raise DataError(f"expected a self_augmentation schedule, got {schedule.kind!r}")
    xb, single = _as_rows(x, enc.dim)
    noise = _noise_block(xb.shape[0], len(schedule.steps), enc.dim, rng, single)
    y = encoder_eval(enc, xb, 0.0)
    for k, t in enumerate(schedule.steps):
        mixed = t * y + (1.0 - t) * xb + noise_scale(t, enc.sigma, "paper_eq12") * noise[:, k, :]
        y = encoder_eval(enc, mixed, t)
    return y[0] if single else y


def _ancestral_mix(state, estimate, t_prev: float, t: float, sigma: float, z):
    """(t/t_prev)-weighted carry of the previous state toward the estimate."""
    ratio = t / t_prev
    return ratio * state + (1.0 - ratio) * estimate + noise_scale(t, sigma, "paper_eq12") * z


def sample_ancestral(enc: CotEncoder, x, schedule: SampleSchedule, rng: Rng) -> np.ndarray:
    """Ablation sampler: carry the augmented state down a decreasing ladder.

    The state starts at the input (implicit t_0 = 1) and the estimate at
    the one-step translation; each step mixes state toward the current
    estimate with weight 1 - t_k/t_{k-1} and re-encodes.
    """
    if schedule.kind != "ancestral":
        raise DataError(f"expected an ancestral schedule, got {schedule.kind!r}")
    steps = schedule.steps
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise DataError("ancestral schedule must be strictly decreasing")
    xb, single = _as_rows(x, enc.dim)
    noise = _noise_block(xb.shape[0], len(steps), enc.dim, rng, single)
    state = xb
    y = encoder_eval(enc, xb, 0.0)
    t_prev = 1.0
    for k, t in enumerate(steps):
        state = _ancestral_mix(state, y, t_prev, t, enc.sigma, noise[:, k, :])
        y = encoder_eval(enc, state, t)
        t_prev = t
    return y[0] if single else y


def compose_guidance(g: MaskedGuidance) -> np.ndarray:
    """Masked overwrite: patch entries where the mask is set, base elsewhere."""
    return np.where(g.mask, g.patch, g.base)


def edit_compose(enc: CotEncoder, g: MaskedGuidance, t_g: float, rng: Rng) -> np.ndarray:
    """One-step re-synthesis of a composed guidance vector.

    t_g = 1 returns the guidance untouched (maximal faithfulness); t_g = 0
    fully re-translates it.
    """
    if not (0.0 <= t_g <= 1.0):
        raise DataError(f"t_g must lie in [0, 1], got {t_g}")
    guidance = compose_guidance(g)
    if guidance.shape != (enc.dim,):
        raise DataError(f"guidance length {guidance.size} does not match encoder dim {enc.dim}")
    z = rng.normal(guidance.shape)
    return encoder_eval(enc, guidance + noise_scale(t_g, enc.sigma, "paper_eq12") * z, t_g)


def edit_couple(enc: CotEncoder, shape, texture, t_c: float, rng: Rng) -> np.ndarray:
    """Fuse a target-side shape with a source-side texture at time t_c."""
    shape = np.asarray(shape, dtype=np.float64)
    texture = np.asarray(texture, dtype=np.float64)
    if shape.shape != (enc.dim,) or texture.shape != (enc.dim,):
        raise DataError("shape and texture must be vectors matching the encoder dim")
    if not (0.0 <= t_c <= 1.0):
        raise DataError(f"t_c must lie in [0, 1], got {t_c}")
    z = rng.normal(shape.shape)
    mixed = t_c * shape + (1.0 - t_c) * texture + noise_scale(t_c, enc.sigma, "paper_eq12") * z
    return encoder_eval(enc, mixed, t_c)


def edit_augment(enc: CotEncoder, anchor, drivers, t_a: float, rng: Rng) -> np.ndarray:
    """Fuse one fixed anchor with a series of drivers; returns the series.

    Each driver row uses its own rng substream, so the output equals the
    per-row edits done independently.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.shape != (enc.dim,):
        raise DataError(f"anchor length {anchor.size} does not match encoder dim {enc.dim}")
    if not (0.0 <= t_a <= 1.0):
        raise DataError(f"t_a must lie in [0, 1], got {t_a}")
    rows, single = _as_rows(drivers, enc.dim, "drivers")
    z = np.stack([rng.substream(i).normal((enc.dim,)) for i in range(rows.shape[0])])
    mixed = t_a * anchor + (1.0 - t_a) * rows + noise_scale(t_a, enc.sigma, "paper_eq12") * z
    out = encoder_eval(enc, mixed, np.full(rows.shape[0], t_a))
    return out[0] if single else out
