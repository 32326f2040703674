"""Session-scoped trained pipelines shared across test modules.

Training is the expensive part of the suite, so the default-config 2-D
pipeline (acceptance criterion material) and a small glyph pipeline are
trained once per session.
"""

import time

import numpy as np
import pytest

from cotflow.datasets import DatasetSpec, sample_batch
from cotflow.encoder import CotTrainConfig, train_cot
from cotflow.neural_ot import TrainConfig, train_neural_ot
from cotflow.rng import Rng


@pytest.fixture(scope="session")
def pipeline2d():
    """Default-config eight_gaussians -> moons pipeline, seed 7."""
    src = DatasetSpec("eight_gaussians", 1, 1)
    tgt = DatasetSpec("moons", 1, 2)
    t0 = time.perf_counter()
    ot_cfg = TrainConfig(seed=7)
    ot = train_neural_ot(ot_cfg, src, tgt, Rng(ot_cfg.seed))
    cot_cfg = CotTrainConfig(seed=7)
    cot = train_cot(cot_cfg, src, ot.model, Rng(cot_cfg.seed))
    train_seconds = time.perf_counter() - t0
    return {
        "source": src,
        "target": tgt,
        "ot": ot,
        "cot": cot,
        "train_seconds": train_seconds,
        "source_eval": sample_batch(src, 4096, Rng(1001)),
        "target_eval": sample_batch(tgt, 4096, Rng(1002)),
    }


@pytest.fixture(scope="session")
def glyph_pipeline():
    """Small-budget glyph_outline -> glyph_filled pipeline for editor tests."""
    src = DatasetSpec("glyph_outline", 1, 1)
    tgt = DatasetSpec("glyph_filled", 1, 2)
    ot_cfg = TrainConfig(
        n_outer=400, k_map=5, batch_size=64, lr=3e-4,
        map_hidden=(64, 64), psi_hidden=(64, 64), seed=11, log_every=200,
    )
    ot = train_neural_ot(ot_cfg, src, tgt, Rng(ot_cfg.seed))
    cot_cfg = CotTrainConfig(
        n_iters=1200, batch_size=64, lr=3e-4, body_hidden=(128,),
        n_freq=4, seed=12, log_every=400,
    )
    cot = train_cot(cot_cfg, src, ot.model, Rng(cot_cfg.seed))
    return {
        "source": src,
        "target": tgt,
        "ot": ot,
        "cot": cot,
        "anchor": sample_batch(tgt, 1, Rng(2101))[0],
        "drivers": sample_batch(src, 8, Rng(2102)),
    }
